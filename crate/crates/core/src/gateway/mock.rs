//! Scripted backend: replies chosen by matching the latest user message,
//! optionally also the conversation's opening message.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Backend, Conversation, GatewayError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Substring,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matcher {
    pub kind: MatchKind,
    pub text: String,
}

impl Matcher {
    pub fn matches(&self, text: &str) -> bool {
        match self.kind {
            MatchKind::Exact => self.text == text,
            MatchKind::Substring => text.contains(&self.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    /// Must also match the first message of the conversation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<Matcher>,
    pub reply: String,
}

impl MockRule {
    pub fn new(kind: MatchKind, text: impl Into<String>, reply: impl Into<String>) -> Self {
        Self { matcher: Matcher { kind, text: text.into() }, context: None, reply: reply.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockBackend {
    rules: Vec<MockRule>,
}

impl MockBackend {
    pub fn new(rules: Vec<MockRule>) -> Self {
        Self { rules }
    }

    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        serde_json::from_str(text).map(Self::new).map_err(|e| GatewayError::Config(format!("mock fixture: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("mock fixture {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))
    }

    pub fn rules(&self) -> &[MockRule] {
        &self.rules
    }

    /// Reply for a single-message conversation.
    pub fn reply_for(&self, prompt: &str) -> Option<&str> {
        self.reply_in(prompt, prompt)
    }

    /// Exact rules first, then substring rules, each in file order. Rules
    /// with a context also need it to match `opening`.
    pub fn reply_in(&self, opening: &str, prompt: &str) -> Option<&str> {
        let eligible = |kind: MatchKind| {
            self.rules.iter().find(move |r| {
                r.matcher.kind == kind
                    && r.matcher.matches(prompt)
                    && r.context.as_ref().is_none_or(|c| c.matches(opening))
            })
        };
        eligible(MatchKind::Exact).or_else(|| eligible(MatchKind::Substring)).map(|r| r.reply.as_str())
    }
}

impl Backend for MockBackend {
    fn complete(&self, conv: &Conversation) -> Result<String, GatewayError> {
        let prompt = conv.last_user().ok_or(GatewayError::EmptyConversation)?;
        let opening = conv.messages().first().map_or("", |m| m.content.as_str());
        self.reply_in(opening, prompt).map(str::to_string).ok_or_else(|| {
            let excerpt: String = prompt.chars().take(200).collect();
            GatewayError::MockMiss(excerpt)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(kind: MatchKind, text: &str, reply: &str) -> MockRule {
        MockRule::new(kind, text, reply)
    }

    #[test]
    fn exact_beats_earlier_substring() {
        let m = MockBackend::new(vec![
            rule(MatchKind::Substring, "abc", "sub"),
            rule(MatchKind::Exact, "abc", "exact"),
            rule(MatchKind::Substring, "b", "later"),
        ]);
        assert_eq!(m.reply_for("abc"), Some("exact"));
        assert_eq!(m.reply_for("xabcx"), Some("sub"));
        assert_eq!(m.reply_for("xbx"), Some("later"));
        assert_eq!(m.reply_for("zzz"), None);
    }

    #[test]
    fn context_narrows_a_rule() {
        let mut narrow = rule(MatchKind::Substring, "again", "kb3");
        narrow.context = Some(Matcher { kind: MatchKind::Substring, text: "works_written".into() });
        let m = MockBackend::new(vec![narrow, rule(MatchKind::Substring, "again", "kb1")]);
        let mut conv = Conversation::user("relations: works_written");
        conv.push_assistant("x");
        conv.push_user("try again");
        assert_eq!(m.complete(&conv).unwrap(), "kb3");
        let mut conv = Conversation::user("relations: place_of_birth");
        conv.push_assistant("x");
        conv.push_user("try again");
        assert_eq!(m.complete(&conv).unwrap(), "kb1");
    }

    #[test]
    fn miss_is_an_error() {
        let m = MockBackend::default();
        assert!(matches!(m.complete(&Conversation::user("q")), Err(GatewayError::MockMiss(_))));
    }

    #[test]
    fn fixture_format() {
        let m = MockBackend::from_json(r#"[{"match":{"kind":"substring","text":"books"},"reply":"NK"}]"#).unwrap();
        assert_eq!(m.complete(&Conversation::user("which books")).unwrap(), "NK");
        assert!(MockBackend::from_json(r#"[{"match":{"kind":"regex","text":"x"},"reply":""}]"#).is_err());
    }
}
