use std::sync::LazyLock;

use regex::Regex;

/// Replacement for a masked quoted identifier or literal.
pub const ID_PLACEHOLDER: &str = "⟨id⟩";
/// Key used for an empty message.
pub const EMPTY_KEY: &str = "⟨empty⟩";

static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"'([^'\s]*)'").unwrap());

// javac quotes keywords in syntax messages ("'else' without 'if'"); they are
// part of the message template, not user identifiers.
const JAVA_KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "record",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "void",
    "volatile",
    "while",
    "var",
    "yield",
    "true",
    "false",
    "null",
];

/// Canonical key for a compiler message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canonical {
    pub key: String,
    /// Set when the input was empty (after whitespace collapsing).
    pub empty: bool,
}

fn keep_quoted(token: &str) -> bool {
    // Pure punctuation such as ';' or '(' carries the message's meaning.
    !token.chars().any(char::is_alphanumeric) || JAVA_KEYWORDS.contains(&token)
}

/// Normalizes a first-line compiler message into a template key.
///
/// Quoted identifier- or literal-shaped tokens become [`ID_PLACEHOLDER`],
/// quoted punctuation and keywords are kept, and whitespace runs collapse to
/// one space.
pub fn canonicalize(raw_message: &str) -> Canonical {
    let masked = QUOTED.replace_all(raw_message, |caps: &regex::Captures<'_>| {
        if keep_quoted(&caps[1]) {
            caps[0].to_string()
        } else {
            ID_PLACEHOLDER.to_string()
        }
    });
    let key = masked.split_whitespace().collect::<Vec<_>>().join(" ");
    if key.is_empty() {
        Canonical {
            key: EMPTY_KEY.to_string(),
            empty: true,
        }
    } else {
        Canonical { key, empty: false }
    }
}
