//! Comment- and string-aware Lean 4 tokenizer.
//!
//! Line comments, block comments (nested) and string/char literals are
//! recognized so that `sorry`, declaration keywords and identifiers inside
//! them are never counted. Doc comments are kept as tokens because the
//! declaration scanner attaches them to the following declaration.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    /// `/-- ... -/`
    DocComment,
    /// `/-! ... -/`
    ModuleDoc,
    Symbol,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Byte offset into the source.
    pub start: usize,
    pub end: usize,
    /// 1-based line.
    pub line: usize,
    /// 0-based column in characters.
    pub col: usize,
    /// No other token precedes this one on its line.
    pub first_on_line: bool,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokenKind::Ident
    }
}

fn is_ident_start(c: char) -> bool {
    (c.is_alphabetic() && !matches!(c, 'λ' | 'Π' | 'Σ')) || c == '_'
}

fn is_ident_rest(c: char) -> bool {
    c.is_alphanumeric()
        || matches!(c, '_' | '\'' | '!' | '?')
        || ('\u{2080}'..='\u{209C}').contains(&c)
        || ('\u{1D62}'..='\u{1D6A}').contains(&c)
}

const MULTI_SYMBOLS: [&str; 8] = [":=", "=>", "->", "<-", "...", "..", "@[", "<;>"];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    line_start: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(c)
    }

    fn col(&self) -> usize {
        self.src[self.line_start..self.pos].chars().count()
    }

    /// Skips a nested block comment whose opening `/-` has been consumed.
    fn skip_block_comment(&mut self) {
        let mut depth = 1;
        while depth > 0 {
            if self.rest().starts_with("/-") {
                self.bump();
                self.bump();
                depth += 1;
            } else if self.rest().starts_with("-/") {
                self.bump();
                self.bump();
                depth -= 1;
            } else if self.bump().is_none() {
                return;
            }
        }
    }

    fn skip_string(&mut self) {
        // opening quote consumed
        while let Some(c) = self.bump() {
            match c {
                '\\' => {
                    self.bump();
                }
                '"' => return,
                _ => {}
            }
        }
    }
}

pub fn lex(src: &str) -> Vec<Token> {
    let mut cur = Cursor { src, pos: 0, line: 1, line_start: 0 };
    let mut tokens: Vec<Token> = Vec::new();
    let mut last_line_with_token = 0;
    // previous significant character, for telling `'c'` from `h'`
    let mut prev_char: Option<char> = None;

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            prev_char = Some(c);
            continue;
        }
        let start = cur.pos;
        let line = cur.line;
        let col = cur.col();
        let rest = cur.rest();

        let kind = if rest.starts_with("--") {
            while let Some(ch) = cur.peek() {
                if ch == '\n' {
                    break;
                }
                cur.bump();
            }
            prev_char = Some(' ');
            continue;
        } else if rest.starts_with("/--") || rest.starts_with("/-!") {
            let kind = if rest.starts_with("/--") { TokenKind::DocComment } else { TokenKind::ModuleDoc };
            cur.bump();
            cur.bump();
            cur.skip_block_comment();
            kind
        } else if rest.starts_with("/-") {
            cur.bump();
            cur.bump();
            cur.skip_block_comment();
            prev_char = Some(' ');
            continue;
        } else if c == '"' {
            cur.bump();
            cur.skip_string();
            TokenKind::Str
        } else if c == 'r' && (cur.peek_at(1) == Some('"') || (cur.peek_at(1) == Some('#') && rest[1..].trim_start_matches('#').starts_with('"'))) {
            cur.bump();
            let mut hashes = 0;
            while cur.peek() == Some('#') {
                cur.bump();
                hashes += 1;
            }
            cur.bump();
            let close = format!("\"{}", "#".repeat(hashes));
            match cur.rest().find(&close) {
                Some(i) => {
                    let target = cur.pos + i + close.len();
                    while cur.pos < target {
                        cur.bump();
                    }
                }
                None => while cur.bump().is_some() {},
            }
            TokenKind::Str
        } else if c == '\'' && !prev_char.is_some_and(is_ident_rest) && char_literal_len(rest).is_some() {
            let len = char_literal_len(rest).unwrap();
            let target = cur.pos + len;
            while cur.pos < target {
                cur.bump();
            }
            TokenKind::Char
        } else if c == '«' || is_ident_start(c) {
            lex_ident(&mut cur);
            TokenKind::Ident
        } else if c.is_ascii_digit() {
            while cur.peek().is_some_and(|ch| ch.is_ascii_alphanumeric() || ch == '_') {
                cur.bump();
            }
            if cur.peek() == Some('.') && cur.peek_at(1).is_some_and(|ch| ch.is_ascii_digit()) {
                cur.bump();
                while cur.peek().is_some_and(|ch| ch.is_ascii_digit()) {
                    cur.bump();
                }
            }
            TokenKind::Number
        } else {
            match MULTI_SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    for _ in 0..s.chars().count() {
                        cur.bump();
                    }
                }
                None => {
                    cur.bump();
                }
            }
            TokenKind::Symbol
        };

        let text = src[start..cur.pos].to_string();
        prev_char = text.chars().last();
        tokens.push(Token {
            kind,
            text,
            start,
            end: cur.pos,
            line,
            col,
            first_on_line: last_line_with_token != line,
        });
        // a multi-line token still occupies the line it ends on
        last_line_with_token = cur.line;
    }
    tokens
}

fn lex_ident(cur: &mut Cursor<'_>) {
    loop {
        match cur.peek() {
            Some('«') => {
                while let Some(ch) = cur.bump() {
                    if ch == '»' {
                        break;
                    }
                }
            }
            Some(ch) if is_ident_start(ch) => {
                while cur.peek().is_some_and(is_ident_rest) {
                    cur.bump();
                }
            }
            _ => return,
        }
        // dotted continuation `Foo.bar`
        if cur.peek() == Some('.') && cur.peek_at(1).is_some_and(|ch| ch == '«' || is_ident_start(ch)) {
            cur.bump();
        } else {
            return;
        }
    }
}

/// Length in bytes of a char literal at the start of `s`, if any.
fn char_literal_len(s: &str) -> Option<usize> {
    let mut chars = s.char_indices();
    chars.next()?; // opening quote
    let (_, c) = chars.next()?;
    if c == '\\' {
        // escape: scan to the closing quote within a short window
        for (i, ch) in chars.take(10) {
            if ch == '\'' {
                return Some(i + 1);
            }
        }
        None
    } else if c == '\'' || c == '\n' {
        None
    } else {
        let (i, close) = chars.next()?;
        (close == '\'').then_some(i + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idents(src: &str) -> Vec<String> {
        lex(src).into_iter().filter(|t| t.is_ident()).map(|t| t.text).collect()
    }

    #[test]
    fn comments_and_strings_hide_identifiers() {
        let src = "-- sorry here\n/- block /- nested sorry -/ still -/\ndef x := \"sorry\" ++ sorry";
        assert_eq!(idents(src), ["def", "x", "sorry"]);
    }

    #[test]
    fn doc_comments_are_tokens() {
        let toks = lex("/-- doc -/\ntheorem t : True := trivial");
        assert_eq!(toks[0].kind, TokenKind::DocComment);
        assert_eq!(toks[0].text, "/-- doc -/");
        assert!(toks[1].first_on_line);
        assert_eq!((toks[1].line, toks[1].col), (2, 0));
    }

    #[test]
    fn primes_and_char_literals() {
        assert_eq!(idents("have h' := foo'_aux x"), ["have", "h'", "foo'_aux", "x"]);
        let toks = lex("f 'a' '\\n'");
        assert_eq!(toks[1].kind, TokenKind::Char);
        assert_eq!(toks[2].kind, TokenKind::Char);
    }

    #[test]
    fn dotted_names_and_guillemets() {
        assert_eq!(idents("Nat.cast_le.mpr «weird name».x"), ["Nat.cast_le.mpr", "«weird name».x"]);
    }

    #[test]
    fn symbols_and_positions() {
        let toks = lex("def f : Nat := 1\n  | x => y");
        let texts: Vec<_> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["def", "f", ":", "Nat", ":=", "1", "|", "x", "=>", "y"]);
        assert_eq!((toks[6].line, toks[6].col, toks[6].first_on_line), (2, 2, true));
        assert!(!toks[7].first_on_line);
    }

    #[test]
    fn raw_strings() {
        assert_eq!(idents("r#\"sorry \"# x"), ["x"]);
    }

    #[test]
    fn unterminated_constructs_do_not_panic() {
        lex("/- open");
        lex("\"open");
        lex("'");
        lex("«open");
    }
}
