use std::fmt;

/// 1-based line and column of a source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {location}: {message}")]
    Syntax { location: Location, message: String },
    #[error("unsupported syntax at {location}: {construct}")]
    Unsupported { location: Location, construct: String },
}

impl ParseError {
    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            location: Location { line, column },
            message: message.into(),
        }
    }

    pub(crate) fn unsupported(line: usize, construct: impl Into<String>) -> Self {
        ParseError::Unsupported {
            location: Location { line, column: 1 },
            construct: construct.into(),
        }
    }

    pub fn location(&self) -> Location {
        match self {
            ParseError::Syntax { location, .. } | ParseError::Unsupported { location, .. } => {
                *location
            }
        }
    }
}
