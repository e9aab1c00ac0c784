/// Characters that may appear inside a token.
pub fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-'
}

/// Splits text into lowercase tokens.
///
/// A token is a maximal run of letters, digits and hyphens with leading and
/// trailing hyphens removed; everything else separates tokens. A run made
/// only of hyphens yields nothing. So `"“Dose”-response"` gives `dose`,
/// `response` and `"two- to threefold"` gives `two`, `to`, `threefold`,
/// while `"beta-blocker"` stays one token.
pub fn tokenize(text: &str) -> Vec<String> {
    // Lowercase first: some case mappings expand into combining marks,
    // which must then act as separators.
    text.to_lowercase()
        .split(|c: char| !is_token_char(c))
        .map(|run| run.trim_matches('-'))
        .filter(|run| !run.is_empty())
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ... -- ").is_empty());
    }

    #[test]
    fn opening_sentence() {
        assert_eq!(
            tokenize("Bumetanide and furosemide in heart failure."),
            ["bumetanide", "and", "furosemide", "in", "heart", "failure"]
        );
    }

    #[test]
    fn quoted_hyphenated_compound() {
        // “ and ” are separators; the run "-response" loses its leading hyphen.
        assert_eq!(
            tokenize("“Dose”-response curves"),
            ["dose", "response", "curves"]
        );
    }

    #[test]
    fn inner_hyphen_kept() {
        assert_eq!(
            tokenize("beta-blocker, two- to threefold (1.0 mg)"),
            ["beta-blocker", "two", "to", "threefold", "1", "0", "mg"]
        );
    }

    #[test]
    fn tokens_retokenize_to_themselves() {
        for t in tokenize("Half-life of FUROSEMIDE was ~2x; “resistance” ‐ CHF-2015") {
            assert_eq!(tokenize(&t), vec![t.clone()]);
        }
    }
}
