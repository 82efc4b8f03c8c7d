//! `{slot}` templates.
//!
//! A slot is `{name}` where the name is lowercase ASCII letters and
//! underscores. `{{` and `}}` produce literal braces; any other brace is
//! literal text, so JSON snippets need no escaping. Substituted values are
//! never rescanned.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::llm::PromptFamily;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template `{template}` uses unknown slot `{{{slot}}}`")]
    UnknownSlot { template: String, slot: String },
    #[error("template `{template}` needs a value for `{{{slot}}}`")]
    MissingValue { template: String, slot: String },
    #[error("cannot read template {path}: {cause}")]
    Io { path: String, cause: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Part {
    Text(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    name: String,
    parts: Vec<Part>,
}

fn slot_name_at(s: &str) -> Option<&str> {
    let end = s.find('}')?;
    let name = &s[..end];
    (!name.is_empty() && name.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')).then_some(name)
}

impl Template {
    pub fn parse(name: &str, text: &str) -> Template {
        let mut parts = Vec::new();
        let mut buf = String::new();
        let mut rest = text;
        while let Some(c) = rest.chars().next() {
            if rest.starts_with("{{") || rest.starts_with("}}") {
                buf.push(c);
                rest = &rest[2..];
            } else if c == '{' {
                if let Some(slot) = slot_name_at(&rest[1..]) {
                    if !buf.is_empty() {
                        parts.push(Part::Text(std::mem::take(&mut buf)));
                    }
                    parts.push(Part::Slot(slot.to_string()));
                    rest = &rest[slot.len() + 2..];
                } else {
                    buf.push(c);
                    rest = &rest[1..];
                }
            } else {
                buf.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
        if !buf.is_empty() {
            parts.push(Part::Text(buf));
        }
        Template {
            name: name.to_string(),
            parts,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn slots(&self) -> BTreeSet<&str> {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Slot(s) => Some(s.as_str()),
                Part::Text(_) => None,
            })
            .collect()
    }

    pub fn check_slots(&self, allowed: &[&str]) -> Result<(), TemplateError> {
        match self.slots().into_iter().find(|s| !allowed.contains(s)) {
            Some(slot) => Err(TemplateError::UnknownSlot {
                template: self.name.clone(),
                slot: slot.to_string(),
            }),
            None => Ok(()),
        }
    }

    pub fn render(&self, values: &HashMap<&str, &str>) -> Result<String, TemplateError> {
        let mut out = String::new();
        for part in &self.parts {
            match part {
                Part::Text(t) => out.push_str(t),
                Part::Slot(s) => out.push_str(values.get(s.as_str()).ok_or_else(|| {
                    TemplateError::MissingValue {
                        template: self.name.clone(),
                        slot: s.clone(),
                    }
                })?),
            }
        }
        Ok(out)
    }
}

/// System and user templates for one prompt family.
#[derive(Debug, Clone)]
pub struct FamilyTemplates {
    pub system: Template,
    pub user: Template,
}

/// Slots each family may use.
pub fn allowed_slots(family: PromptFamily) -> &'static [&'static str] {
    match family {
        PromptFamily::Generation => &["target_language", "entity_block", "source"],
        PromptFamily::Feedback => &[
            "target_language",
            "entity_block",
            "source",
            "candidate",
            "examples",
        ],
        PromptFamily::Refinement => &["target_language", "entity_block", "source", "history"],
        PromptFamily::FewshotGeneration => &[
            "source_language",
            "target_language",
            "entity_block",
            "source",
            "candidate",
            "feedback",
        ],
    }
}

const FAMILIES: [PromptFamily; 4] = [
    PromptFamily::Generation,
    PromptFamily::Feedback,
    PromptFamily::Refinement,
    PromptFamily::FewshotGeneration,
];

fn builtin_text(family: PromptFamily) -> (&'static str, &'static str) {
    match family {
        PromptFamily::Generation => (
            include_str!("../../assets/templates/generation.system.txt"),
            include_str!("../../assets/templates/generation.user.txt"),
        ),
        PromptFamily::Feedback => (
            include_str!("../../assets/templates/feedback.system.txt"),
            include_str!("../../assets/templates/feedback.user.txt"),
        ),
        PromptFamily::Refinement => (
            include_str!("../../assets/templates/refinement.system.txt"),
            include_str!("../../assets/templates/refinement.user.txt"),
        ),
        PromptFamily::FewshotGeneration => (
            include_str!("../../assets/templates/fewshot_generation.system.txt"),
            include_str!("../../assets/templates/fewshot_generation.user.txt"),
        ),
    }
}

fn strip_final_newline(text: &str) -> &str {
    text.strip_suffix('\n')
        .map(|t| t.strip_suffix('\r').unwrap_or(t))
        .unwrap_or(text)
}

/// Templates for every prompt family.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    families: HashMap<PromptFamily, FamilyTemplates>,
}

impl TemplateSet {
    /// The templates shipped with the crate.
    pub fn builtin() -> Self {
        let families = FAMILIES
            .iter()
            .map(|&f| {
                let (system, user) = builtin_text(f);
                let t = FamilyTemplates {
                    system: Template::parse(&format!("{f}.system"), strip_final_newline(system)),
                    user: Template::parse(&format!("{f}.user"), strip_final_newline(user)),
                };
                (f, t)
            })
            .collect();
        TemplateSet { families }
    }

    /// Overrides built-ins with `<family>.system.txt` / `<family>.user.txt`
    /// files found in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::builtin();
        for family in FAMILIES {
            for role in ["system", "user"] {
                let name = format!("{family}.{role}");
                let path = dir.join(format!("{name}.txt"));
                if !path.exists() {
                    continue;
                }
                let text = fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                    path: path.display().to_string(),
                    cause: e.to_string(),
                })?;
                let template = Template::parse(&name, strip_final_newline(&text));
                let entry = set.families.get_mut(&family).expect("builtin family");
                if role == "system" {
                    entry.system = template;
                } else {
                    entry.user = template;
                }
            }
        }
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        for (family, t) in &self.families {
            let allowed = allowed_slots(*family);
            t.system.check_slots(allowed)?;
            t.user.check_slots(allowed)?;
        }
        Ok(())
    }

    pub fn get(&self, family: PromptFamily) -> &FamilyTemplates {
        &self.families[&family]
    }
}
