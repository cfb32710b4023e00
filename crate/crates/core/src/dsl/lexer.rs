use super::ast::Pos;
use super::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Param(String),
    /// Digits with optional fraction; `unit` is an alphabetic suffix glued to it.
    Number {
        text: String,
        unit: Option<String>,
    },
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

const SYMBOLS: &[&str] = &[
    ":=", "!=", "<=", ">=", "->", ":", "=", "<", ">", "(", ")", "[", "]", "{", "}", "|", ",",
    "+", "-", ";",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let pos = Pos { line, col };
        if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let is_param = c == '$';
            if is_param {
                bump!();
            }
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            if word.is_empty() {
                return Err(ParseError::Syntax {
                    pos,
                    expected: "parameter name after '$'".into(),
                });
            }
            out.push(Token {
                tok: if is_param { Tok::Param(word) } else { Tok::Ident(word) },
                pos,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            let text: String = chars[start..i].iter().collect();
            let ustart = i;
            while i < chars.len() && chars[i].is_ascii_alphabetic() {
                bump!();
            }
            let unit = (i > ustart).then(|| chars[ustart..i].iter().collect());
            out.push(Token {
                tok: Tok::Number { text, unit },
                pos,
            });
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym = SYMBOLS.iter().find(|s| rest.starts_with(**s));
        match sym {
            Some(s) => {
                for _ in 0..s.len() {
                    bump!();
                }
                out.push(Token { tok: Tok::Sym(s), pos });
            }
            None => {
                return Err(ParseError::Syntax {
                    pos,
                    expected: format!("a token, found '{c}'"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_numbers_with_units_and_params() {
        let toks = tokenize("x := 1.667s + $t // tail\n300ms").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("x".into()),
                Tok::Sym(":="),
                Tok::Number {
                    text: "1.667".into(),
                    unit: Some("s".into())
                },
                Tok::Sym("+"),
                Tok::Param("t".into()),
                Tok::Number {
                    text: "300".into(),
                    unit: Some("ms".into())
                },
                Tok::Eof,
            ]
        );
        assert_eq!(toks[5].pos, Pos { line: 2, col: 1 });
    }

    #[test]
    fn rejects_stray_characters() {
        assert!(matches!(
            tokenize("a # b"),
            Err(ParseError::Syntax { pos: Pos { line: 1, col: 3 }, .. })
        ));
    }
}
