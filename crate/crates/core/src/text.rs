/// Lowercases and collapses runs of whitespace to single spaces.
pub fn normalize_term(s: &str) -> String {
    s.split_whitespace().map(|w| w.to_lowercase()).collect::<Vec<_>>().join(" ")
}

/// Lowercase ASCII alphanumerics joined by underscores, e.g.
/// `"Upper GI (2WW)"` becomes `"upper_gi_2ww"`.
pub fn slug(s: &str) -> String {
    let mut out = String::new();
    let mut pending_sep = false;
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.push(c.to_ascii_lowercase());
        } else {
            pending_sep = true;
        }
    }
    out
}

/// PascalCase identifier suitable for a CQL library name.
pub(crate) fn pascal_ident(s: &str) -> String {
    let mut out = String::new();
    for word in slug(s).split('_').filter(|w| !w.is_empty()) {
        let mut chars = word.chars();
        if let Some(first) = chars.next() {
            out.push(first.to_ascii_uppercase());
            out.extend(chars);
        }
    }
    if !out.starts_with(|c: char| c.is_ascii_alphabetic()) {
        out.insert_str(0, "Pathway");
    }
    out
}

/// Collapses whitespace so text can sit on a single comment line.
pub(crate) fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_case_and_spacing() {
        assert_eq!(normalize_term("  Iron  Deficiency\tAnaemia "), "iron deficiency anaemia");
        assert_eq!(normalize_term(""), "");
    }

    #[test]
    fn slugs_and_idents() {
        assert_eq!(slug("Upper GI (2WW)"), "upper_gi_2ww");
        assert_eq!(slug("--"), "");
        assert_eq!(pascal_ident("lung cancer pathway"), "LungCancerPathway");
        assert_eq!(pascal_ident("2WW skin"), "Pathway2wwSkin");
        assert_eq!(pascal_ident(""), "Pathway");
    }
}
