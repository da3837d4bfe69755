//! Model formula mini-language.
//!
//! ```text
//! formula := ident "~" term ("+" term)*
//! term    := "1" | "-1" | "spatial" | ident
//! ident   := [A-Za-z][A-Za-z0-9._]*
//! ```

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use thiserror::Error;

/// Likelihood family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Normal,
    Bernoulli,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Bernoulli => "bernoulli",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown family `{0}` (expected normal or bernoulli)")]
pub struct UnknownFamily(pub String);

impl FromStr for Family {
    type Err = UnknownFamily;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "normal" | "gaussian" => Ok(Family::Normal),
            "bernoulli" => Ok(Family::Bernoulli),
            other => Err(UnknownFamily(other.to_string())),
        }
    }
}

/// Parsed model: response, fixed effects, optional spatial field, family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub response: String,
    pub covariates: Vec<String>,
    pub intercept: bool,
    pub spatial: bool,
    pub family: Family,
}

impl ModelSpec {
    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    /// Fixed-effect names in design-matrix column order.
    pub fn fixed_effect_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.covariates.len() + 1);
        if self.intercept {
            names.push("(Intercept)".to_string());
        }
        names.extend(self.covariates.iter().cloned());
        names
    }

    pub fn n_fixed(&self) -> usize {
        self.covariates.len() + usize::from(self.intercept)
    }
}

/// Prints the formula (without family); parsing the output gives back the same spec.
impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ~ {}", self.response, if self.intercept { "1" } else { "-1" })?;
        for c in &self.covariates {
            write!(f, " + {c}")?;
        }
        if self.spatial {
            f.write_str(" + spatial")?;
        }
        Ok(())
    }
}

impl FromStr for ModelSpec {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

/// Parse failure; `position` is a 0-based character offset into the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {position}")]
pub struct FormulaError {
    pub kind: FormulaErrorKind,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaErrorKind {
    #[error("missing `~`")]
    MissingTilde,
    #[error("expected a response name")]
    ExpectedResponse,
    #[error("expected a term")]
    ExpectedTerm,
    #[error("expected `+` or end of formula")]
    ExpectedPlus,
    #[error("empty right-hand side")]
    EmptyRightSide,
    #[error("duplicate covariate `{0}`")]
    DuplicateCovariate(String),
    #[error("`spatial` given more than once")]
    DuplicateSpatial,
    #[error("response `{0}` used as a covariate")]
    ResponseAsCovariate(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    One,
    MinusOne,
    Tilde,
    Plus,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, FormulaError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
        } else if c == '~' {
            out.push((start, Token::Tilde));
            i += 1;
        } else if c == '+' {
            out.push((start, Token::Plus));
            i += 1;
        } else if c == '-' {
            i += 1;
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '1' && !continues_number(&chars, i + 1) {
                out.push((start, Token::MinusOne));
                i += 1;
            } else {
                return Err(FormulaError { kind: FormulaErrorKind::ExpectedTerm, position: start });
            }
        } else if c == '1' && !continues_number(&chars, i + 1) {
            out.push((start, Token::One));
            i += 1;
        } else if c.is_ascii_alphabetic() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Token::Ident(chars[start..i].iter().collect())));
        } else {
            return Err(FormulaError { kind: FormulaErrorKind::ExpectedTerm, position: start });
        }
    }
    Ok(out)
}

fn continues_number(chars: &[char], i: usize) -> bool {
    i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_')
}

/// Parses a formula; the family defaults to normal and is set separately.
pub fn parse_formula(text: &str) -> Result<ModelSpec, FormulaError> {
    let end = text.chars().count();
    let err = |kind, position| Err(FormulaError { kind, position });
    let tokens = tokenize(text)?;
    let Some(tilde) = tokens.iter().position(|(_, t)| *t == Token::Tilde) else {
        return err(FormulaErrorKind::MissingTilde, end);
    };
    let response = match &tokens[..tilde] {
        [(_, Token::Ident(name))] => name.clone(),
        [] => return err(FormulaErrorKind::ExpectedResponse, tokens[tilde].0),
        [(p, _), ..] => return err(FormulaErrorKind::ExpectedResponse, *p),
    };
    let rhs = &tokens[tilde + 1..];
    if rhs.is_empty() {
        return err(FormulaErrorKind::EmptyRightSide, end);
    }

    let mut spec = ModelSpec {
        response,
        covariates: Vec::new(),
        intercept: true,
        spatial: false,
        family: Family::Normal,
    };
    let mut forced_intercept = false;
    let mut expect_term = true;
    for (pos, tok) in rhs {
        let pos = *pos;
        if !expect_term {
            if *tok != Token::Plus {
                return err(FormulaErrorKind::ExpectedPlus, pos);
            }
            expect_term = true;
            continue;
        }
        match tok {
            Token::One => forced_intercept = true,
            Token::MinusOne => spec.intercept = false,
            Token::Ident(name) if name == "spatial" => {
                if spec.spatial {
                    return err(FormulaErrorKind::DuplicateSpatial, pos);
                }
                spec.spatial = true;
            }
            Token::Ident(name) => {
                if *name == spec.response {
                    return err(FormulaErrorKind::ResponseAsCovariate(name.clone()), pos);
                }
                if spec.covariates.contains(name) {
                    return err(FormulaErrorKind::DuplicateCovariate(name.clone()), pos);
                }
                spec.covariates.push(name.clone());
            }
            Token::Tilde | Token::Plus => return err(FormulaErrorKind::ExpectedTerm, pos),
        }
        expect_term = false;
    }
    if expect_term {
        return err(FormulaErrorKind::ExpectedTerm, end);
    }
    if forced_intercept {
        spec.intercept = true;
    }
    Ok(spec)
}
