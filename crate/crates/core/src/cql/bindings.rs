use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::ast::Library;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("node {node} is bound by both \"{first}\" and \"{second}\"")]
pub struct DuplicateBinding {
    pub node: String,
    pub first: String,
    pub second: String,
}

impl DuplicateBinding {
    pub fn code(&self) -> &'static str {
        "E_DUP_BINDING"
    }
}

/// Map from diagram node id to the define that implements it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LibraryBindings {
    pub library_name: String,
    pub version: String,
    pub node_to_define: BTreeMap<String, String>,
}

impl LibraryBindings {
    pub fn define_for(&self, node_id: &str) -> Option<&str> {
        self.node_to_define.get(node_id).map(String::as_str)
    }
}

/// Collects `// node: <id>` bindings from a library's defines.
pub fn extract_bindings(lib: &Library) -> Result<LibraryBindings, DuplicateBinding> {
    let mut node_to_define = BTreeMap::new();
    for d in &lib.defines {
        let Some(node) = &d.node_binding else { continue };
        if let Some(first) = node_to_define.insert(node.clone(), d.name.clone()) {
            return Err(DuplicateBinding { node: node.clone(), first, second: d.name.clone() });
        }
    }
    Ok(LibraryBindings { library_name: lib.name.clone(), version: lib.version.clone(), node_to_define })
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_library;
    use super::*;

    #[test]
    fn collects_and_rejects_duplicates() {
        let lib = parse_library(
            "library D version '2'\n// node: C1\ndefine \"C1_Criteria\": true\n\
             // unrelated\ndefine \"Helper\": false\n// node: E1\ndefine \"E1_Outcome\": 'x'\n",
        )
        .unwrap();
        let b = extract_bindings(&lib).unwrap();
        assert_eq!(b.define_for("C1"), Some("C1_Criteria"));
        assert_eq!(b.define_for("E1"), Some("E1_Outcome"));
        assert_eq!(b.node_to_define.len(), 2);
        assert_eq!(b.version, "2");

        let dup =
            parse_library("library D version '2'\n// node: C1\ndefine \"A\": true\n// node: C1\ndefine \"B\": true\n").unwrap();
        let err = extract_bindings(&dup).unwrap_err();
        assert_eq!(err.code(), "E_DUP_BINDING");
        assert_eq!((err.first.as_str(), err.second.as_str()), ("A", "B"));
    }
}
