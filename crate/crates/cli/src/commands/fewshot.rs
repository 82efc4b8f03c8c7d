use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use ea_refine::corpus::LanguagePair;
use ea_refine::feedback::parse_feedback;
use ea_refine::llm::{ChatRequest, Gateway, PromptFamily, RequestTag};
use ea_refine::prompt::{FewShotExample, FewShotStore, PromptKit};
use ea_refine::retry::RetryPolicy;
use ea_refine::Locale;
use serde::{Deserialize, Serialize};

use crate::common::{build_backend, jsonl, load_fewshot, write_file, BackendArgs, Ctx};
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct FewshotArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Pair whose examples are ported.
    #[arg(long, default_value = "en-ko")]
    pub source_pair: LanguagePair,
    /// Pairs to generate examples for, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<LanguagePair>,
    /// Generate for every supported pair except the source pair.
    #[arg(long, conflicts_with = "targets")]
    pub all_targets: bool,
    /// Store to read source examples from; built-in examples by default.
    #[arg(long)]
    pub fewshot_dir: Option<PathBuf>,
    /// Proposals are written here for review, never into the live store.
    #[arg(long)]
    pub staging_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
struct Proposal {
    entity_block: String,
    candidate: String,
    feedback_text: String,
}

#[derive(Debug, Serialize)]
struct Rejection {
    pair: String,
    index: usize,
    error: String,
}

fn parse_proposal(text: &str, source: &FewShotExample) -> Result<FewShotExample, String> {
    let start = text.find('{').ok_or("no JSON object in the response")?;
    let end = text.rfind('}').ok_or("no JSON object in the response")?;
    let proposal: Proposal = serde_json::from_str(&text[start..=end]).map_err(|e| e.to_string())?;
    let feedback =
        parse_feedback(&proposal.feedback_text).map_err(|e| format!("feedback_text: {e}"))?;
    let example = FewShotExample {
        source: source.source.clone(),
        entity_block: proposal.entity_block,
        candidate: proposal.candidate,
        feedback_text: proposal.feedback_text,
        entity_score: feedback.entity_score,
        quality_score: feedback.quality_score,
    };
    example.validate()?;
    Ok(example)
}

pub fn run(ctx: &Ctx, args: &FewshotArgs) -> Result<(), CliError> {
    let targets: Vec<LanguagePair> = if args.all_targets {
        Locale::TARGETS
            .iter()
            .filter(|&&l| l != args.source_pair.target)
            .map(|&l| LanguagePair::english_to(l).expect("target locale"))
            .collect()
    } else {
        args.targets.clone()
    };
    if targets.is_empty() {
        eprintln!("no target pairs given; nothing to do");
        return Ok(());
    }
    if let Some(live) = args
        .fewshot_dir
        .clone()
        .or_else(|| ctx.file.fewshot_dir.clone())
    {
        let same = match (live.canonicalize(), args.staging_dir.canonicalize()) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        };
        if same {
            return Err(CliError::usage(
                "the staging directory must differ from the live few-shot store",
            ));
        }
    }

    let store = load_fewshot(ctx, args.fewshot_dir.clone())?;
    let sources = store.examples(args.source_pair).to_vec();
    if sources.is_empty() {
        return Err(CliError::usage(format!(
            "no examples for source pair {}",
            args.source_pair
        )));
    }
    let backend = build_backend(ctx, &args.backend)?;
    let gateway = Gateway::new(backend.backend.clone(), RetryPolicy::default(), ctx.seed);
    let kit = PromptKit::builtin();

    let mut staged = FewShotStore::default();
    let mut rejections = Vec::new();
    let mut gateway_failures = 0;
    let mut accepted: BTreeMap<String, usize> = BTreeMap::new();
    for pair in &targets {
        let mut examples = Vec::new();
        for (index, source) in sources.iter().enumerate() {
            let bundle = kit
                .render_fewshot_generation_prompt(source, args.source_pair, *pair)
                .map_err(CliError::usage)?;
            let tag = RequestTag::new(
                format!("{pair}#{index}"),
                PromptFamily::FewshotGeneration,
                0,
            );
            let request = ChatRequest::new(
                bundle.system_text,
                bundle.user_text,
                backend.model.clone(),
                tag,
            );
            let outcome = match gateway.complete(&request) {
                Ok(response) => parse_proposal(&response.text, source),
                Err(e) => {
                    gateway_failures += 1;
                    Err(format!("gateway: {e}"))
                }
            };
            match outcome {
                Ok(example) => examples.push(example),
                Err(error) => {
                    log::warn!("{pair}#{index}: {error}");
                    rejections.push(Rejection {
                        pair: pair.to_string(),
                        index,
                        error,
                    });
                }
            }
        }
        accepted.insert(pair.to_string(), examples.len());
        if !examples.is_empty() {
            staged.insert(*pair, examples);
        }
    }

    std::fs::create_dir_all(&args.staging_dir).map_err(CliError::data)?;
    staged
        .write_dir(&args.staging_dir)
        .map_err(CliError::data)?;
    write_file(
        &args.staging_dir.join("rejected.jsonl"),
        &jsonl(&rejections),
    )?;
    write_file(
        &args.staging_dir.join("transcript.jsonl"),
        &gateway.transcript().to_jsonl(&[]),
    )?;
    println!(
        "{}",
        serde_json::json!({"accepted": accepted, "rejected": rejections.len(), "staging_dir": args.staging_dir})
    );
    if gateway_failures > 0 {
        return Err(CliError::data(format!(
            "{gateway_failures} requests failed"
        )));
    }
    Ok(())
}
