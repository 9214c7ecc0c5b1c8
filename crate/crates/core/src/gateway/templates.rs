//! Prompt and feedback templates with `{{name}}` placeholders.

use std::collections::BTreeMap;
use std::path::Path;

macro_rules! catalog {
    ($($id:literal),* $(,)?) => {
        /// Template ids shipped with the crate.
        pub const TEMPLATE_IDS: &[&str] = &[$($id),*];

        fn builtin() -> BTreeMap<String, String> {
            let mut m = BTreeMap::new();
            $(m.insert($id.to_string(), strip_newline(include_str!(concat!("../../templates/", $id, ".txt"))));)*
            m
        }
    };
}

catalog!(
    "pun-header",
    "pun-header-answerable",
    "pun-nk-exemplar",
    "pun-question",
    "fb-syntax",
    "fb-kb-inconsistency",
    "fb-qlf-disagreement",
    "fb-empty-answer",
    "fb-intermediate-node",
    "fb-answer-entity",
    "v3-naturalize",
    "v3-backtranslate",
    "v3-equivalence",
    "scun-select",
);

fn strip_newline(s: &str) -> String {
    s.strip_suffix('\n').unwrap_or(s).to_string()
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("template {template} has unbound placeholder {{{{{name}}}}}")]
    UnboundPlaceholder { template: String, name: String },
    #[error("template {template}: unterminated placeholder")]
    Unterminated { template: String },
    #[error("reading template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    texts: BTreeMap<String, String>,
}

impl Default for Templates {
    fn default() -> Self {
        Self { texts: builtin() }
    }
}

impl Templates {
    /// Built-in templates, with any `<id>.txt` found in `dir` taking
    /// precedence. Files with ids outside the catalog are ignored.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut t = Self::default();
        for id in TEMPLATE_IDS {
            let path = dir.join(format!("{id}.txt"));
            if path.exists() {
                let text = std::fs::read_to_string(&path)
                    .map_err(|source| TemplateError::Io { path: path.display().to_string(), source })?;
                t.texts.insert(id.to_string(), strip_newline(&text));
            }
        }
        Ok(t)
    }

    pub fn raw(&self, id: &str) -> Result<&str, TemplateError> {
        self.texts.get(id).map(String::as_str).ok_or_else(|| TemplateError::UnknownTemplate(id.to_string()))
    }

    /// Substitutes every placeholder in one pass; substituted text is not
    /// rescanned. Extra bindings are ignored.
    pub fn render(&self, id: &str, bindings: &[(&str, &str)]) -> Result<String, TemplateError> {
        let text = self.raw(id)?;
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after.find("}}").ok_or_else(|| TemplateError::Unterminated { template: id.to_string() })?;
            let name = after[..end].trim();
            let value = bindings.iter().find(|(k, _)| *k == name).map(|(_, v)| *v).ok_or_else(|| {
                TemplateError::UnboundPlaceholder { template: id.to_string(), name: name.to_string() }
            })?;
            out.push_str(value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }

    /// Placeholder names used by a template, in order of first use.
    pub fn placeholders(&self, id: &str) -> Result<Vec<String>, TemplateError> {
        let mut names = Vec::new();
        let mut rest = self.raw(id)?;
        while let Some(start) = rest.find("{{") {
            let after = &rest[start + 2..];
            let Some(end) = after.find("}}") else { break };
            let name = after[..end].trim().to_string();
            if !names.contains(&name) {
                names.push(name);
            }
            rest = &after[end + 2..];
        }
        Ok(names)
    }
}
