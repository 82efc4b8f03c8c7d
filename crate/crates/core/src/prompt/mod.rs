//! Rendering of the generation, feedback and refinement prompts.

mod fewshot;
mod template;

use std::collections::HashMap;

pub use fewshot::{load_fewshot_store, FewShotError, FewShotExample, FewShotStore};
pub use template::{allowed_slots, FamilyTemplates, Template, TemplateError, TemplateSet};

use crate::corpus::{LanguagePair, TaskInstance};
use crate::feedback::Feedback;
use crate::llm::PromptFamily;
use crate::qid::Qid;
use crate::wikidata::{entity_summary, EntityRecord, MissingEnglishLabel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub family: PromptFamily,
    pub language_pair: LanguagePair,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error(transparent)]
    MissingEnglishLabel(#[from] MissingEnglishLabel),
    #[error("entity {entity} does not match instance QID {instance}")]
    EntityMismatch { entity: Qid, instance: Qid },
    #[error("candidate translation is empty")]
    EmptyCandidate,
    #[error("refinement needs at least one (candidate, feedback) pair")]
    EmptyHistory,
    #[error(transparent)]
    MissingFewShot(#[from] FewShotError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Templates plus few-shot store. Immutable once built.
#[derive(Debug, Clone)]
pub struct PromptKit {
    templates: TemplateSet,
    fewshot: FewShotStore,
    strict_fewshot: bool,
}

impl PromptKit {
    pub fn new(templates: TemplateSet, fewshot: FewShotStore) -> Self {
        PromptKit {
            templates,
            fewshot,
            strict_fewshot: false,
        }
    }

    /// Built-in templates and examples.
    pub fn builtin() -> Self {
        Self::new(TemplateSet::builtin(), FewShotStore::builtin())
    }

    /// In strict mode a feedback prompt for a pair without examples fails.
    pub fn strict(mut self, strict: bool) -> Self {
        self.strict_fewshot = strict;
        self
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn fewshot(&self) -> &FewShotStore {
        &self.fewshot
    }

    fn render(
        &self,
        family: PromptFamily,
        pair: LanguagePair,
        values: &HashMap<&str, &str>,
    ) -> Result<PromptBundle, PromptError> {
        let t = self.templates.get(family);
        Ok(PromptBundle {
            system_text: t.system.render(values)?,
            user_text: t.user.render(values)?,
            family,
            language_pair: pair,
        })
    }

    pub fn render_generation_prompt(
        &self,
        entity: &EntityRecord,
        instance: &TaskInstance,
    ) -> Result<PromptBundle, PromptError> {
        let block = entity_block(entity, instance)?;
        let values = HashMap::from([
            ("target_language", instance.target().language_name()),
            ("entity_block", block.as_str()),
            ("source", instance.source_text.as_str()),
        ]);
        self.render(PromptFamily::Generation, instance.language_pair, &values)
    }

    pub fn render_feedback_prompt(
        &self,
        entity: &EntityRecord,
        instance: &TaskInstance,
        candidate: &str,
    ) -> Result<PromptBundle, PromptError> {
        if candidate.trim().is_empty() {
            return Err(PromptError::EmptyCandidate);
        }
        let block = entity_block(entity, instance)?;
        let pair = instance.language_pair;
        let examples = self.fewshot.examples(pair);
        if examples.is_empty() && self.strict_fewshot {
            return Err(FewShotError::MissingFewShot(pair).into());
        }
        // An example about the same sentence would repeat the source text.
        let shown: Vec<&FewShotExample> = examples
            .iter()
            .filter(|e| !e.source.contains(instance.source_text.as_str()))
            .collect();
        let examples_text = render_examples(&shown, pair);
        let values = HashMap::from([
            ("target_language", pair.target.language_name()),
            ("entity_block", block.as_str()),
            ("source", instance.source_text.as_str()),
            ("candidate", candidate),
            ("examples", examples_text.as_str()),
        ]);
        self.render(PromptFamily::Feedback, pair, &values)
    }

    pub fn render_refine_prompt(
        &self,
        entity: &EntityRecord,
        instance: &TaskInstance,
        history: &[(String, Feedback)],
    ) -> Result<PromptBundle, PromptError> {
        if history.is_empty() {
            return Err(PromptError::EmptyHistory);
        }
        let block = entity_block(entity, instance)?;
        let pair = instance.language_pair;
        let history_text = render_history(history, pair);
        let values = HashMap::from([
            ("target_language", pair.target.language_name()),
            ("entity_block", block.as_str()),
            ("source", instance.source_text.as_str()),
            ("history", history_text.as_str()),
        ]);
        self.render(PromptFamily::Refinement, pair, &values)
    }

    /// Prompt asking the model to port one example to another language pair.
    pub fn render_fewshot_generation_prompt(
        &self,
        example: &FewShotExample,
        from: LanguagePair,
        to: LanguagePair,
    ) -> Result<PromptBundle, PromptError> {
        let values = HashMap::from([
            ("source_language", from.target.language_name()),
            ("target_language", to.target.language_name()),
            ("entity_block", example.entity_block.as_str()),
            ("source", example.source.as_str()),
            ("candidate", example.candidate.as_str()),
            ("feedback", example.feedback_text.as_str()),
        ]);
        self.render(PromptFamily::FewshotGeneration, to, &values)
    }
}

fn entity_block(entity: &EntityRecord, instance: &TaskInstance) -> Result<String, PromptError> {
    if entity.qid != instance.wikidata_qid {
        return Err(PromptError::EntityMismatch {
            entity: entity.qid.clone(),
            instance: instance.wikidata_qid.clone(),
        });
    }
    Ok(entity_summary(entity, instance.target())?)
}

fn render_examples(examples: &[&FewShotExample], pair: LanguagePair) -> String {
    let language = pair.target.language_name();
    examples
        .iter()
        .enumerate()
        .map(|(i, e)| {
            format!(
                "Example {n}\nEnglish text: {src}\nEntity information:\n{block}\n{language} translation: {cand}\nEvaluation:\n{fb}",
                n = i + 1,
                src = e.source,
                block = e.entity_block,
                cand = e.candidate,
                fb = e.feedback_text,
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn render_history(history: &[(String, Feedback)], pair: LanguagePair) -> String {
    let language = pair.target.language_name();
    history
        .iter()
        .enumerate()
        .map(|(i, (candidate, feedback))| {
            format!(
                "Attempt {n}\n{language} translation: {candidate}\nFeedback:\n{fb}",
                n = i + 1,
                fb = feedback.to_text(),
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}
