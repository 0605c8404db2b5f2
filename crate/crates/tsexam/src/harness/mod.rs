//! Model evaluation harness: prompts, rendering, the chat client, answer
//! parsing and scored runs.

pub mod client;
pub mod evaluate;
pub mod parse;
pub mod prompt;
pub mod render;
pub mod serialize;

pub use client::{query_model, EndpointClient, ModelEndpoint, QueryError, QueryFailure, RateLimiter, RawResponse, RetryPolicy, Usage};
pub use evaluate::{candidate_id, evaluate, preflight, CategoryScore, EvaluateError, ItemOutcome, ScoredRun, TranscriptRecord};
pub use parse::{parse_answer, ParseFailure};
pub use prompt::{build_prompt, Block, Content, Guidance, Modality, Prompt, PromptConfig, PromptPart};
pub use render::{render_plot, render_values, PlotError, PANEL_HEIGHT, PANEL_WIDTH};
pub use serialize::{serialize_text, serialize_values, truncate_one_decimal};
