use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Reserved id for out-of-vocabulary tokens (and padding).
pub const UNK: usize = 0;
const UNK_TOKEN: &str = "<unk>";

/// Lowercases, splits ASCII punctuation into separate tokens, then splits on
/// whitespace. Applying it to its own space-joined output is a no-op.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(text.len() + 8);
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_ascii_punctuation() {
            spaced.push(' ');
            spaced.push(ch);
            spaced.push(' ');
        } else {
            spaced.push(ch);
        }
    }
    spaced.split_whitespace().map(str::to_owned).collect()
}

/// Token ↔ id map with id 0 reserved. Ids are assigned in first-seen order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    frozen: bool,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary { tokens: vec![UNK_TOKEN.to_string()], index: HashMap::new(), frozen: false }
    }

    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Self {
        let mut v = Vocabulary::new();
        for t in tokens {
            v.insert(&t);
        }
        v
    }

    /// Stop assigning new ids; unknown tokens map to [`UNK`].
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn get(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if token == UNK_TOKEN {
            return UNK;
        }
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        if self.frozen {
            return UNK;
        }
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), self.tokens.len() - 1);
        self.tokens.len() - 1
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn encode(&mut self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.insert(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter().map(|&i| self.token(i)).collect::<Vec<_>>().join(" ")
    }

    /// Non-reserved tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens[1..]
    }

    /// Rebuilds the lookup index after deserialisation.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().skip(1).map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in self.tokens() {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Self {
        Vocabulary::from_tokens(text.lines().filter(|l| !l.is_empty()).map(str::to_owned))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_separates_punctuation_and_lowercases() {
        assert_eq!(tokenize("Who wrote \"Hamlet\"?"), vec!["who", "wrote", "\"", "hamlet", "\"", "?"]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
    }

    #[test]
    fn tokenize_is_idempotent() {
        for s in ["It's 3.5 km, (roughly).", "A-B  c", "ÉCOLE d'été"] {
            let once = tokenize(s);
            assert_eq!(tokenize(&once.join(" ")), once);
        }
    }

    #[test]
    fn ids_are_bijective_and_unk_is_reserved() {
        let mut v = Vocabulary::new();
        let a = v.insert("alpha");
        let b = v.insert("beta");
        assert_eq!((a, b), (1, 2));
        assert_eq!(v.insert("alpha"), 1);
        assert_eq!(v.get("gamma"), UNK);
        v.freeze();
        assert_eq!(v.insert("gamma"), UNK);
        assert_eq!(v.len(), 3);
        let round = Vocabulary::from_text(&v.to_text());
        assert_eq!(round.get("beta"), 2);
    }
}
