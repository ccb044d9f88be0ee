use super::ast::Span;
use super::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    KwStruct,
    KwEntry,
    KwSwitch,
    KwCase,
    KwDefault,
    KwElements,
    KwBytes,
    KwUint8,
    KwUint16,
    KwUint32,
    KwUint64,
    KwBit,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    Ge,
    Le,
    Gt,
    Lt,
    EqEq,
    Ne,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer `{n}`"),
            Tok::KwStruct => write!(f, "`struct`"),
            Tok::KwEntry => write!(f, "`entry`"),
            Tok::KwSwitch => write!(f, "`switch`"),
            Tok::KwCase => write!(f, "`case`"),
            Tok::KwDefault => write!(f, "`default`"),
            Tok::KwElements => write!(f, "`elements`"),
            Tok::KwBytes => write!(f, "`bytes`"),
            Tok::KwUint8 => write!(f, "`UINT8`"),
            Tok::KwUint16 => write!(f, "`UINT16`"),
            Tok::KwUint32 => write!(f, "`UINT32`"),
            Tok::KwUint64 => write!(f, "`UINT64`"),
            Tok::KwBit => write!(f, "`BIT`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Ge => write!(f, "`>=`"),
            Tok::Le => write!(f, "`<=`"),
            Tok::Gt => write!(f, "`>`"),
            Tok::Lt => write!(f, "`<`"),
            Tok::EqEq => write!(f, "`==`"),
            Tok::Ne => write!(f, "`!=`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpannedTok {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(text: &str) -> Result<Vec<SpannedTok>, Diagnostic> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }

    loop {
        let span = Span { line, col };
        let c = match chars.peek().copied() {
            Some(c) => c,
            None => {
                out.push(SpannedTok { tok: Tok::Eof, span });
                return Ok(out);
            }
        };
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '/' => {
                bump!();
                if chars.peek() == Some(&'/') {
                    while let Some(&n) = chars.peek() {
                        if n == '\n' {
                            break;
                        }
                        bump!();
                    }
                } else {
                    out.push(SpannedTok { tok: Tok::Slash, span });
                }
            }
            '{' => {
                bump!();
                out.push(SpannedTok { tok: Tok::LBrace, span });
            }
            '}' => {
                bump!();
                out.push(SpannedTok { tok: Tok::RBrace, span });
            }
            '(' => {
                bump!();
                out.push(SpannedTok { tok: Tok::LParen, span });
            }
            ')' => {
                bump!();
                out.push(SpannedTok { tok: Tok::RParen, span });
            }
            '[' => {
                bump!();
                out.push(SpannedTok { tok: Tok::LBracket, span });
            }
            ']' => {
                bump!();
                out.push(SpannedTok { tok: Tok::RBracket, span });
            }
            ';' => {
                bump!();
                out.push(SpannedTok { tok: Tok::Semi, span });
            }
            ':' => {
                bump!();
                out.push(SpannedTok { tok: Tok::Colon, span });
            }
            '+' => {
                bump!();
                out.push(SpannedTok { tok: Tok::Plus, span });
            }
            '-' => {
                bump!();
                out.push(SpannedTok { tok: Tok::Minus, span });
            }
            '*' => {
                bump!();
                out.push(SpannedTok { tok: Tok::Star, span });
            }
            '>' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    out.push(SpannedTok { tok: Tok::Ge, span });
                } else {
                    out.push(SpannedTok { tok: Tok::Gt, span });
                }
            }
            '<' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    out.push(SpannedTok { tok: Tok::Le, span });
                } else {
                    out.push(SpannedTok { tok: Tok::Lt, span });
                }
            }
            '=' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                }
                // Both `=` and `==` denote equality.
                out.push(SpannedTok { tok: Tok::EqEq, span });
            }
            '!' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    out.push(SpannedTok { tok: Tok::Ne, span });
                } else {
                    return Err(Diagnostic::error("lexical error: expected `=` after `!`", span));
                }
            }
            '0'..='9' => {
                let mut s = String::new();
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_alphanumeric() {
                        s.push(n);
                        bump!();
                    } else {
                        break;
                    }
                }
                let value = if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
                    u64::from_str_radix(hex, 16)
                } else {
                    s.parse::<u64>()
                };
                match value {
                    Ok(v) => out.push(SpannedTok { tok: Tok::Int(v), span }),
                    Err(_) => {
                        return Err(Diagnostic::error(
                            format!("lexical error: bad integer literal `{s}`"),
                            span,
                        ))
                    }
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_alphanumeric() || n == '_' {
                        s.push(n);
                        bump!();
                    } else {
                        break;
                    }
                }
                let tok = match s.as_str() {
                    "struct" => Tok::KwStruct,
                    "entry" => Tok::KwEntry,
                    "switch" => Tok::KwSwitch,
                    "case" => Tok::KwCase,
                    "default" => Tok::KwDefault,
                    "elements" => Tok::KwElements,
                    "bytes" => Tok::KwBytes,
                    "UINT8" => Tok::KwUint8,
                    "UINT16" => Tok::KwUint16,
                    "UINT32" => Tok::KwUint32,
                    "UINT64" => Tok::KwUint64,
                    "BIT" => Tok::KwBit,
                    _ => Tok::Ident(s),
                };
                out.push(SpannedTok { tok, span });
            }
            other => {
                return Err(Diagnostic::error(
                    format!("lexical error: unexpected character `{other}`"),
                    span,
                ))
            }
        }
    }
}
