//! Entity-aware machine translation: entity retrieval, prompt rendering,
//! a chat-completion gateway, the generate/feedback/refine loop and
//! evaluation metrics.

pub mod corpus;
pub mod eval;
pub mod feedback;
pub mod http;
pub mod llm;
pub mod locale;
pub mod prompt;
pub mod qid;
pub mod rate_limit;
pub mod refine;
pub mod retry;
pub mod wikidata;

pub use corpus::{Corpus, LanguagePair, ReferenceTranslation, Split, TaskInstance};
pub use locale::Locale;
pub use qid::Qid;
