//! Case- and diacritic-insensitive text folding used for city, country and
//! person-name comparison.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Folds `text` to a comparison key: NFD-decomposed, combining marks
/// stripped, uppercased, punctuation other than letters/digits turned into
/// single spaces, and surrounding whitespace trimmed.
///
/// `"d'Annunzio"` and `"D ANNUNZIO"` fold to the same key.
pub fn fold(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.nfd().filter(|c| !is_combining_mark(*c)) {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(c.to_uppercase());
        } else {
            pending_space = true;
        }
    }
    out
}
