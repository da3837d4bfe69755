fn main() {
    std::process::exit(geocv::cli::run(std::env::args_os()));
}
