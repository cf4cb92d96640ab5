use super::error::{ParseError, ParseErrorKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Unsigned number literal, kept as written (`10`, `0.8`, `1/3`).
    Number(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Lt,
    Gt,
    Comma,
    Eq,
    Bang,
    Amp,
    Pipe2,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Pipe2 => "`||`".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn tokenize(text: &str) -> Result<(Vec<Token>, Pos), ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1;
    let mut col = 1;

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

    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump!();
            }
            continue;
        }
        let tok = if is_ident_start(c) {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if !is_ident_continue(c) {
                    break;
                }
                s.push(c);
                bump!();
            }
            Tok::Ident(s)
        } else if c.is_ascii_digit() || c == '.' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if !(c.is_ascii_digit() || c == '.' || c == '/') {
                    break;
                }
                s.push(c);
                bump!();
            }
            Tok::Number(s)
        } else {
            bump!();
            match c {
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '<' | '⟨' => Tok::Lt,
                '>' | '⟩' => Tok::Gt,
                ',' => Tok::Comma,
                '=' => Tok::Eq,
                '!' => Tok::Bang,
                '&' => {
                    if chars.peek() == Some(&'&') {
                        bump!();
                    }
                    Tok::Amp
                }
                '|' => {
                    if chars.peek() == Some(&'|') {
                        bump!();
                        Tok::Pipe2
                    } else {
                        return Err(ParseError::new(pos, ParseErrorKind::UnexpectedChar('|')));
                    }
                }
                other => return Err(ParseError::new(pos, ParseErrorKind::UnexpectedChar(other))),
            }
        };
        out.push(Token { tok, pos });
    }
    Ok((out, Pos { line, col }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracks_positions_and_skips_comments() {
        let (toks, _) = tokenize("# header\nAction a if !x\n  effects <x prob 0.8>").unwrap();
        assert_eq!(toks[0].tok, Tok::Ident("Action".into()));
        assert_eq!(toks[0].pos, Pos { line: 2, col: 1 });
        let prob = toks.iter().find(|t| matches!(t.tok, Tok::Number(_))).unwrap();
        assert_eq!(prob.tok, Tok::Number("0.8".into()));
        assert_eq!(prob.pos, Pos { line: 3, col: 19 });
    }

    #[test]
    fn rejects_single_pipe() {
        let err = tokenize("a | b").unwrap_err();
        assert_eq!((err.line, err.col), (1, 3));
    }
}
