//! Whitespace and punctuation tokenizer shared by annotation, rendering and
//! metric normalization.

use super::Token;

pub const TRIGGER_OPEN: &str = "⟨tgr⟩";
pub const TRIGGER_CLOSE: &str = "⟨/tgr⟩";

const PUNCTUATION: &[char] = &['.', ',', ';', ':', '!', '?', '"', '(', ')', '[', ']'];

pub fn is_split_punct(c: char) -> bool {
    PUNCTUATION.contains(&c)
}

/// True when every character of `token` is punctuation (ASCII or Unicode).
pub fn is_punctuation_token(token: &str) -> bool {
    !token.is_empty()
        && token
            .chars()
            .all(|c| c.is_ascii_punctuation() || is_split_punct(c) || (!c.is_alphanumeric() && !c.is_whitespace()))
}

/// Split `text` into tokens.
///
/// Whitespace separates chunks. Within a chunk, trigger markers become their
/// own tokens, and leading or trailing characters from `.,;:!?"()[]` are
/// peeled off one per token. Apostrophes and internal punctuation stay inside
/// the word.
pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_strs(text)
        .into_iter()
        .enumerate()
        .map(|(index, text)| Token { text, index })
        .collect()
}

/// Same as [`tokenize`] without position bookkeeping.
pub fn tokenize_strs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut rest = chunk;
        while !rest.is_empty() {
            let open = rest.find(TRIGGER_OPEN);
            let close = rest.find(TRIGGER_CLOSE);
            let next = match (open, close) {
                (Some(o), Some(c)) if c < o => Some((c, TRIGGER_CLOSE)),
                (Some(o), _) => Some((o, TRIGGER_OPEN)),
                (None, Some(c)) => Some((c, TRIGGER_CLOSE)),
                (None, None) => None,
            };
            match next {
                Some((at, marker)) => {
                    peel(&rest[..at], &mut out);
                    out.push(marker.to_string());
                    rest = &rest[at + marker.len()..];
                }
                None => {
                    peel(rest, &mut out);
                    rest = "";
                }
            }
        }
    }
    out
}

fn peel(piece: &str, out: &mut Vec<String>) {
    if piece.is_empty() {
        return;
    }
    let chars: Vec<char> = piece.chars().collect();
    let lead = chars.iter().take_while(|c| is_split_punct(**c)).count();
    if lead == chars.len() {
        out.extend(chars.iter().map(|c| c.to_string()));
        return;
    }
    let trail = chars.iter().rev().take_while(|c| is_split_punct(**c)).count();
    out.extend(chars[..lead].iter().map(|c| c.to_string()));
    out.push(chars[lead..chars.len() - trail].iter().collect());
    out.extend(chars[chars.len() - trail..].iter().map(|c| c.to_string()));
}

/// Join tokens back into readable text: no space before closing punctuation
/// or after opening brackets, straight quotes alternate open/close, trigger
/// markers hug the verb they wrap.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut quote_open = false;
    let mut glue_next = true;
    for token in tokens {
        let t = token.as_ref();
        let attaches_left = matches!(t, "." | "," | ";" | ":" | "!" | "?" | ")" | "]")
            || t == TRIGGER_CLOSE
            || (t == "\"" && quote_open);
        if !glue_next && !attaches_left {
            out.push(' ');
        }
        out.push_str(t);
        glue_next = matches!(t, "(" | "[") || t == TRIGGER_OPEN || (t == "\"" && !quote_open);
        if t == "\"" {
            quote_open = !quote_open;
        }
    }
    out
}

/// Canonical token form used by metrics and alignment: lowercase, trigger
/// markers removed, tokenized, punctuation-only tokens dropped.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    let lowered = text
        .replace(TRIGGER_OPEN, " ")
        .replace(TRIGGER_CLOSE, " ")
        .replace("<tgr>", " ")
        .replace("</tgr>", " ")
        .to_lowercase();
    tokenize_strs(&lowered)
        .into_iter()
        .filter(|t| !is_punctuation_token(t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strs(text: &str) -> Vec<String> {
        tokenize_strs(text)
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n\t").is_empty());
    }

    #[test]
    fn splits_terminal_punctuation() {
        assert_eq!(strs("I opt in."), ["I", "opt", "in", "."]);
    }

    #[test]
    fn trigger_markers_are_single_tokens() {
        assert_eq!(
            strs("⟨tgr⟩get⟨/tgr⟩ promotions"),
            ["⟨tgr⟩", "get", "⟨/tgr⟩", "promotions"]
        );
        assert_eq!(
            strs("to ⟨tgr⟩sign up⟨/tgr⟩."),
            ["to", "⟨tgr⟩", "sign", "up", "⟨/tgr⟩", "."]
        );
    }

    #[test]
    fn apostrophes_and_inner_punctuation_stay() {
        assert_eq!(strs("I'm (e.g. don't)"), ["I'm", "(", "e.g", ".", "don't", ")"]);
        assert_eq!(strs("opt-in, \"now\""), ["opt-in", ",", "\"", "now", "\""]);
    }

    #[test]
    fn indices_are_contiguous() {
        let toks = tokenize("a b, c.");
        for (i, t) in toks.iter().enumerate() {
            assert_eq!(t.index, i);
            assert!(!t.text.is_empty());
            assert!(!t.text.contains(char::is_whitespace));
        }
    }

    #[test]
    fn detokenize_reads_naturally() {
        let toks = strs("If I opt in, I would (probably) \"get\" ⟨tgr⟩get⟨/tgr⟩ promotions.");
        assert_eq!(
            detokenize(&toks),
            "If I opt in, I would (probably) \"get\" ⟨tgr⟩get⟨/tgr⟩ promotions."
        );
    }

    #[test]
    fn normalization() {
        assert_eq!(
            normalize_tokens("User ⟨tgr⟩Gets⟨/tgr⟩ <tgr>promotions</tgr>, now!"),
            ["user", "gets", "promotions", "now"]
        );
        assert!(normalize_tokens(" . , ").is_empty());
    }

    #[test]
    fn punctuation_tokens() {
        assert!(is_punctuation_token("."));
        assert!(is_punctuation_token("--"));
        assert!(!is_punctuation_token("e.g"));
        assert!(!is_punctuation_token(""));
    }

    proptest! {
        #[test]
        fn idempotent_on_rejoined_output(text in "[a-z'.,;:!?\"()\\[\\] \\-]{0,40}") {
            let once = tokenize_strs(&text);
            let again = tokenize_strs(&detokenize(&once));
            prop_assert_eq!(&once, &again);
            let spaced = tokenize_strs(&once.join(" "));
            prop_assert_eq!(once, spaced);
        }
    }
}
