//! Tokenizer for subject source text. Tokens lexed from a `//@` comment
//! carry `in_spec = true`; the parser uses that flag to collect
//! specification clauses.

use super::LangError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Char(char),
    Str(String),
    /// `\result`, `\old`, `\forall`, `\exists`
    Backslash(String),
    Mask,
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
    pub in_spec: bool,
}

// Longest first so that maximal munch works with a linear scan.
const PUNCT: &[&str] = &[
    "<==>", "==>", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "++", "--",
    "(", ")", "{", "}", "[", "]", ";", ",", ".", "+", "-", "*", "/", "%", "<", ">", "!", "=",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LangError> {
    Lexer::new(src, 1, 1).run(false)
}

/// Tokenize a bare specification expression.
pub fn tokenize_spec(src: &str) -> Result<Vec<Token>, LangError> {
    Lexer::new(src, 1, 1).run(true)
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: u32, col: u32) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line,
            col,
            _src: src,
        }
    }

    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c))
    }

    fn err(&self, msg: impl Into<String>) -> LangError {
        LangError::Syntax {
            line: self.line,
            col: self.col,
            message: msg.into(),
        }
    }

    fn run(mut self, all_spec: bool) -> Result<Vec<Token>, LangError> {
        let mut out = Vec::new();
        // Inside a `//@` comment until the end of the line.
        let mut in_spec = all_spec;
        loop {
            let c = match self.peek(0) {
                None => break,
                Some(c) => c,
            };
            if c == '\n' {
                self.bump();
                in_spec = all_spec;
                continue;
            }
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            if self.starts_with("//@") {
                if in_spec {
                    return Err(self.err("nested specification comment"));
                }
                self.bump();
                self.bump();
                self.bump();
                in_spec = true;
                continue;
            }
            if self.starts_with("//") {
                while let Some(c) = self.peek(0) {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                continue;
            }
            if self.starts_with("/*") {
                self.bump();
                self.bump();
                loop {
                    if self.peek(0).is_none() {
                        return Err(self.err("unterminated block comment"));
                    }
                    if self.starts_with("*/") {
                        self.bump();
                        self.bump();
                        break;
                    }
                    self.bump();
                }
                continue;
            }
            let (line, col) = (self.line, self.col);
            let tok = self.token(in_spec)?;
            out.push(Token {
                tok,
                line,
                col,
                in_spec,
            });
        }
        out.push(Token {
            tok: Tok::Eof,
            line: self.line,
            col: self.col,
            in_spec: false,
        });
        Ok(out)
    }

    fn token(&mut self, in_spec: bool) -> Result<Tok, LangError> {
        let c = self.peek(0).expect("caller checked");
        if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let mut s = String::new();
            while let Some(c) = self.peek(0) {
                if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
                    s.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            return Ok(Tok::Ident(s));
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(c) = self.peek(0) {
                if c.is_ascii_digit() {
                    s.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            return s
                .parse::<i64>()
                .ok()
                .filter(|v| *v <= i64::from(i32::MAX) + 1)
                .map(Tok::Int)
                .ok_or_else(|| self.err(format!("integer literal out of range: {s}")));
        }
        if c == '\\' {
            self.bump();
            let mut s = String::new();
            while let Some(c) = self.peek(0) {
                if c.is_ascii_alphabetic() {
                    s.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            if !in_spec {
                return Err(self.err(format!("`\\{s}` outside a specification")));
            }
            return match s.as_str() {
                "result" | "old" | "forall" | "exists" => Ok(Tok::Backslash(s)),
                _ => Err(LangError::Unsupported(format!("\\{s}"))),
            };
        }
        if c == '"' {
            self.bump();
            let mut s = String::new();
            loop {
                match self.bump() {
                    None | Some('\n') => return Err(self.err("unterminated string literal")),
                    Some('"') => break,
                    Some('\\') => s.push(self.escape()?),
                    Some(c) => s.push(c),
                }
            }
            return Ok(Tok::Str(s));
        }
        if c == '\'' {
            self.bump();
            let ch = match self.bump() {
                Some('\\') => self.escape()?,
                Some(c) if c != '\'' && c != '\n' => c,
                _ => return Err(self.err("malformed character literal")),
            };
            if self.bump() != Some('\'') {
                return Err(self.err("malformed character literal"));
            }
            return Ok(Tok::Char(ch));
        }
        if self.starts_with("<MASK>") {
            for _ in 0..6 {
                self.bump();
            }
            return Ok(Tok::Mask);
        }
        for p in PUNCT {
            if self.starts_with(p) {
                for _ in 0..p.chars().count() {
                    self.bump();
                }
                return Ok(Tok::Punct(p));
            }
        }
        Err(self.err(format!("unexpected character {c:?}")))
    }

    fn escape(&mut self) -> Result<char, LangError> {
        match self.bump() {
            Some('n') => Ok('\n'),
            Some('t') => Ok('\t'),
            Some('\\') => Ok('\\'),
            Some('"') => Ok('"'),
            Some('\'') => Ok('\''),
            Some('0') => Ok('\0'),
            _ => Err(self.err("unsupported escape sequence")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn maximal_munch_on_spec_operators() {
        let t = tokenize_spec("a <==> b ==> c <= d").unwrap();
        let p: Vec<_> = t
            .iter()
            .filter_map(|t| match t.tok {
                Tok::Punct(p) => Some(p),
                _ => None,
            })
            .collect();
        assert_eq!(p, vec!["<==>", "==>", "<="]);
    }

    #[test]
    fn spec_comment_tokens_are_flagged() {
        let t = tokenize("//@ ensures \\result > 0;\nint x;").unwrap();
        assert!(t[0].in_spec && t[1].in_spec);
        assert_eq!(t[1].tok, Tok::Backslash("result".into()));
        let int_tok = t
            .iter()
            .find(|t| t.tok == Tok::Ident("int".into()))
            .unwrap();
        assert!(!int_tok.in_spec);
        assert_eq!(int_tok.line, 2);
    }

    #[test]
    fn plain_comments_are_skipped() {
        assert_eq!(
            toks("// hello\n/* block\n comment */ x"),
            vec![Tok::Ident("x".into()), Tok::Eof]
        );
    }

    #[test]
    fn backslash_outside_spec_is_rejected() {
        assert!(tokenize("\\result").is_err());
    }

    #[test]
    fn literals() {
        assert_eq!(
            toks("'a' \"hi\\n\" 42"),
            vec![
                Tok::Char('a'),
                Tok::Str("hi\n".into()),
                Tok::Int(42),
                Tok::Eof
            ]
        );
    }
}
