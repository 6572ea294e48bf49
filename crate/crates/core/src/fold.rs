//! Case- and accent-insensitive text folding shared by the metric and
//! normalization modules.

use unicode_normalization::UnicodeNormalization;
use unicode_normalization::char::is_combining_mark;

/// Folds a string for insensitive comparison: NFD decomposition, removal of
/// combining marks, then Unicode lowercasing.
///
/// "Artículo" and "ARTICULO" fold to the same string. Folding also maps
/// "ñ" to "n"; callers compare folded values only with other folded values,
/// never mix folded and raw text.
pub fn fold(s: &str) -> String {
    s.nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect()
}
