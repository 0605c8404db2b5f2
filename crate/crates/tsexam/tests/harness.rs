mod common;

use std::time::Duration;

use common::{oracle_table, MockServer, Mode};
use tsexam::core::exam::{assemble_exam, DistributionSpec, Exam};
use tsexam::core::synth::SeriesRecipe;
use tsexam::core::template::{instantiate, Category, EXAMPLE_LENGTH, QUESTION_LENGTH};
use tsexam::harness::{
    build_prompt, evaluate, parse_answer, render_plot, render_values, serialize_text, serialize_values, Block, Content, EndpointClient,
    EvaluateError, Guidance, Modality, ParseFailure, PromptConfig, QueryError,
};
use tsexam::pack::builtin_registry;

fn item(template: &str, option: usize, seed: u64) -> tsexam::core::template::ExamItem {
    let reg = builtin_registry().unwrap();
    instantiate(reg.get(template).unwrap(), option, seed, (QUESTION_LENGTH, EXAMPLE_LENGTH)).unwrap()
}

fn exam_with(counts: &[(Category, usize)], seed: u64) -> Exam {
    let mut spec = DistributionSpec::default();
    spec.counts = counts.iter().copied().collect();
    spec.master_seed = seed;
    assemble_exam(&builtin_registry().unwrap(), &spec).unwrap()
}

/// Width and height straight from the IHDR chunk.
fn png_size(bytes: &[u8]) -> (u32, u32) {
    assert_eq!(&bytes[12..16], b"IHDR");
    let w = u32::from_be_bytes(bytes[16..20].try_into().unwrap());
    let h = u32::from_be_bytes(bytes[20..24].try_into().unwrap());
    (w, h)
}

// ---- serialization ----

#[test]
fn serialization_reparses_within_a_tenth() {
    let mut x = 0x9E3779B97F4A7C15u64;
    let values: Vec<f64> = (0..5000)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            ((x >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 200.0
        })
        .collect();
    let text = serialize_values(&values);
    assert!(!text.contains(' '));
    let back: Vec<f64> = text.split(',').map(|t| t.parse().unwrap()).collect();
    assert_eq!(back.len(), values.len());
    for (v, b) in values.iter().zip(&back) {
        assert!((v - b).abs() < 0.1 + 1e-12, "{v} -> {b}");
        assert!(b.abs() <= v.abs(), "truncation moves toward zero: {v} -> {b}");
    }
}

#[test]
fn series_are_not_rescaled() {
    let recipe: SeriesRecipe = serde_json::from_str(r#"{"base":{"kind":"SineWave","params":{"amplitude":3,"period":16}}}"#).unwrap();
    let ts = recipe.generate(128, 1).unwrap();
    let peak = serialize_text(&ts).split(',').map(|t| t.parse::<f64>().unwrap().abs()).fold(0.0, f64::max);
    assert!((2.8..=3.0).contains(&peak), "{peak}");
}

// ---- rendering ----

#[test]
fn png_signature_size_and_determinism() {
    let a = item("trend-direction", 0, 1);
    let one = render_plot(&a.series).unwrap();
    assert_eq!(&one[..4], &[0x89, 0x50, 0x4E, 0x47]);
    assert_eq!(png_size(&one), (800, 400));
    assert_eq!(one, render_plot(&a.series).unwrap());

    let pair = item("granger-presence", 0, 1);
    assert_eq!(pair.series.len(), 2);
    let two = render_plot(&pair.series).unwrap();
    let (w1, h1) = png_size(&one);
    let (w2, h2) = png_size(&two);
    assert_eq!((w2, h2), (w1, 2 * h1));
}

#[test]
fn line_pixels_follow_the_data() {
    // a rising ramp: the plotted line must climb from bottom-left to top-right
    let ramp: Vec<f64> = (0..100).map(|i| i as f64).collect();
    let png = render_values(&[&ramp]).unwrap();
    let decoder = png::Decoder::new(std::io::Cursor::new(png));
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    let px = |x: usize, y: usize| &buf[(y * info.width as usize + x) * 3..][..3];
    let blue_rows = |x: usize| (0..info.height as usize).filter(|&y| px(x, y) == [31, 119, 180]).collect::<Vec<_>>();
    let left = blue_rows(150);
    let right = blue_rows(650);
    assert!(!left.is_empty() && !right.is_empty());
    assert!(left[0] > right[0], "left {left:?} right {right:?}");
}

// ---- prompts ----

#[test]
fn guidance_toggles_exactly_its_block() {
    let it = item("trend-direction", 1, 3);
    let hint = it.hint.clone().unwrap();
    let concept = it.relevant_concepts[0].description.clone();
    let variants = [
        (vec![], false, false),
        (vec![Guidance::Hint], true, false),
        (vec![Guidance::RelevantConcepts], false, true),
        (vec![Guidance::Hint, Guidance::RelevantConcepts], true, true),
    ];
    for (g, has_hint, has_concepts) in variants {
        let p = build_prompt(&it, &PromptConfig::default().with_guidance(&g)).unwrap();
        let text = p.canonical();
        assert_eq!(text.matches(&hint).count(), has_hint as usize, "{g:?}");
        assert_eq!(text.matches(&concept).count(), has_concepts as usize, "{g:?}");
        assert_eq!(p.blocks().contains(&Block::Hint), has_hint);
        assert_eq!(p.blocks().contains(&Block::Concepts), has_concepts);
    }
}

#[test]
fn exemplar_precedes_question() {
    let it = item("cyclic-presence", 0, 4);
    let p = build_prompt(&it, &PromptConfig::default()).unwrap();
    let blocks = p.blocks();
    let pos = |b| blocks.iter().position(|x| *x == b).unwrap();
    assert!(pos(Block::ExampleSeries) < pos(Block::ExampleAnswer));
    assert!(pos(Block::ExampleAnswer) < pos(Block::Question));
    let example = p.text_of(Block::ExampleSeries);
    let numbers = example.lines().last().unwrap().split(',').count();
    assert_eq!(numbers, 64);
    assert!(p.text_of(Block::ExampleAnswer).contains(&it.example_answer));
    let no_shot = build_prompt(&it, &PromptConfig { one_shot: false, ..PromptConfig::default() }).unwrap();
    assert!(!no_shot.blocks().contains(&Block::ExampleSeries));
}

#[test]
fn image_mode_attaches_plots_and_omits_numbers() {
    let it = item("granger-direction", 1, 5);
    let text = build_prompt(&it, &PromptConfig::default()).unwrap();
    let image = build_prompt(&it, &PromptConfig { modality: Modality::Image, ..PromptConfig::default() }).unwrap();
    let canon = image.canonical();
    for s in it.series.iter().chain(&it.example_series) {
        assert!(!canon.contains(&serialize_text(s)));
        assert!(text.canonical().contains(&serialize_text(s)));
    }
    let images: Vec<&Vec<u8>> = image
        .parts
        .iter()
        .filter_map(|p| match &p.content {
            Content::Image(b) => Some(b),
            _ => None,
        })
        .collect();
    assert_eq!(images.len(), 2, "question plot and exemplar plot");
    assert_eq!(png_size(images[0]).1, 800, "two stacked panels");
    assert_eq!(text.text_of(Block::Options), image.text_of(Block::Options));
    assert!(text.text_of(Block::AnswerFormat).contains("letter"));
}

// ---- parsing ----

#[test]
fn parse_fixtures() {
    let opts: Vec<String> = ["Upward trend", "Downward trend", "No clear trend", "Cannot tell"].map(String::from).to_vec();
    assert_eq!(parse_answer("The answer is (B).", &opts), Ok(1));
    assert!(matches!(parse_answer("B or C", &opts), Err(ParseFailure::Ambiguous(_))));
    // the matcher's third rule: a verbatim option quote with no letter
    assert_eq!(parse_answer("The series shows no clear trend", &opts), Ok(2));
    assert_eq!(parse_answer("Downward trend", &opts), Ok(1));
}

// ---- client ----

#[test]
fn mock_round_trip() {
    let server = MockServer::start(Mode::Constant("A".into()));
    let client = EndpointClient::new(server.endpoint("m"));
    let p = build_prompt(&item("trend-direction", 0, 1), &PromptConfig::default()).unwrap();
    let raw = client.query(&p).unwrap();
    assert_eq!(raw.text, "A");
    assert_eq!(raw.retries, 0);
    assert_eq!(raw.usage.unwrap().total_tokens, Some(11));
    let body = &server.bodies.lock().unwrap()[0];
    assert_eq!(body["model"], "mock-model");
    assert_eq!(body["max_tokens"], 1024);
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["seed"], 42);
    assert_eq!(body["messages"][0]["role"], "system");
    assert!(body["messages"][1]["content"].is_string());
}

#[test]
fn retries_then_success() {
    let server = MockServer::start(Mode::FailFirst(2, Box::new(Mode::Constant("C".into()))));
    let client = EndpointClient::new(server.endpoint("m"));
    let p = build_prompt(&item("trend-direction", 0, 1), &PromptConfig::default()).unwrap();
    let raw = client.query(&p).unwrap();
    assert_eq!((raw.text.as_str(), raw.retries), ("C", 2));
    assert_eq!(server.count(), 3);
}

#[test]
fn distinct_failures() {
    let p = build_prompt(&item("trend-direction", 0, 1), &PromptConfig::default()).unwrap();

    let s = MockServer::start(Mode::Status(401));
    let f = EndpointClient::new(s.endpoint("m")).query(&p).unwrap_err();
    assert_eq!((f.error, f.retries, s.count()), (QueryError::Auth(401), 0, 1));

    let s = MockServer::start(Mode::Status(500));
    let f = EndpointClient::new(s.endpoint("m")).query(&p).unwrap_err();
    assert_eq!((f.error, f.retries, s.count()), (QueryError::Status(500), 3, 4));

    let s = MockServer::start(Mode::Garbage);
    let f = EndpointClient::new(s.endpoint("m")).query(&p).unwrap_err();
    assert!(matches!(f.error, QueryError::Malformed(_)));

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dead = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let mut ep = s.endpoint("dead");
    ep.base_url = dead;
    let f = EndpointClient::new(ep).query(&p).unwrap_err();
    assert!(matches!(f.error, QueryError::Transport(_) | QueryError::Timeout), "{:?}", f.error);
    assert_eq!(f.retries, 3);
}

#[test]
fn credentials_come_from_the_environment() {
    let s = MockServer::start(Mode::Constant("A".into()));
    let mut ep = s.endpoint("m");
    ep.api_key_env = Some("TSEXAM_TEST_KEY_HARNESS".into());
    let p = build_prompt(&item("trend-direction", 0, 1), &PromptConfig::default()).unwrap();
    let f = EndpointClient::new(ep.clone()).query(&p).unwrap_err();
    assert!(matches!(f.error, QueryError::Credentials(_)));
    assert_eq!(s.count(), 0);
    std::env::set_var("TSEXAM_TEST_KEY_HARNESS", "k-123");
    EndpointClient::new(ep).query(&p).unwrap();
    assert_eq!(s.auth.lock().unwrap()[0].as_deref(), Some("Bearer k-123"));
}

#[test]
fn rate_limit_spaces_concurrent_requests() {
    let s = MockServer::start(Mode::Constant("A".into()));
    let mut ep = s.endpoint("m");
    ep.rate_limit_per_minute = Some(60);
    ep.parallelism = 10;
    let exam = exam_with(&[(Category::NoiseUnderstanding, 10)], 3);
    evaluate(&exam, &ep, &PromptConfig::default(), None).unwrap();
    let mut log = s.log.lock().unwrap().clone();
    log.sort();
    assert_eq!(log.len(), 10);
    // floor is 1 s; allow a little loopback jitter between send and arrival
    for w in log.windows(2) {
        assert!(w[1] - w[0] >= Duration::from_millis(975), "{:?}", w[1] - w[0]);
    }
}

// ---- evaluate ----

#[test]
fn constant_answer_on_balanced_exam() {
    let s = MockServer::start(Mode::Constant("A".into()));
    let mut ep = s.endpoint("const");
    ep.parallelism = 8;
    let exam = exam_with(&tsexam::core::exam::DEFAULT_COUNTS, 42);
    let mut transcript = Vec::new();
    let run = evaluate(&exam, &ep, &PromptConfig::default(), Some(&mut transcript)).unwrap();
    assert_eq!(run.category_accuracy.len(), 5);
    // exact: "A" is right exactly when the key sits in first position
    let expected = exam.items.iter().filter(|i| i.correct_index == 0).count() as f64 / exam.len() as f64;
    assert_eq!(run.overall_accuracy, expected);
    // and that is close to the mean of 1/k under uniform shuffling
    let mean_inv_k = exam.items.iter().map(|i| 1.0 / i.options.len() as f64).sum::<f64>() / exam.len() as f64;
    let sd = exam.items.iter().map(|i| (1.0 / i.options.len() as f64) * (1.0 - 1.0 / i.options.len() as f64)).sum::<f64>().sqrt() / exam.len() as f64;
    assert!((run.overall_accuracy - mean_inv_k).abs() < 4.0 * sd, "{} vs {mean_inv_k}", run.overall_accuracy);
    for (c, score) in &run.category_accuracy {
        let n = exam.items.iter().filter(|i| i.category == *c).count();
        assert_eq!(score.attempted, n);
        assert!((0.0..=1.0).contains(&score.accuracy));
    }
    assert_eq!(String::from_utf8(transcript).unwrap().lines().count(), exam.len());
}

#[test]
fn oracle_scores_perfectly() {
    let exam = exam_with(&[(Category::PatternRecognition, 20), (Category::CausalityAnalysis, 10)], 8);
    let s = MockServer::start(Mode::Oracle(oracle_table(&exam)));
    let run = evaluate(&exam, &s.endpoint("oracle"), &PromptConfig::default(), None).unwrap();
    assert_eq!(run.overall_accuracy, 1.0);
    assert_eq!(run.parse_failures, 0);
}

#[test]
fn transport_failures_are_recorded_and_the_run_completes() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let mut ep = tsexam::harness::ModelEndpoint::new("down", &url, "m");
    ep.retry.max_retries = 1;
    ep.retry.initial_backoff_ms = 1;
    let exam = exam_with(&[(Category::AnomalyDetection, 4)], 2);
    let mut transcript = Vec::new();
    let run = evaluate(&exam, &ep, &PromptConfig::default(), Some(&mut transcript)).unwrap();
    assert_eq!(run.overall_accuracy, 0.0);
    assert_eq!((run.parse_failures, run.query_errors), (4, 4));
    let text = String::from_utf8(transcript).unwrap();
    assert!(text.lines().all(|l| l.contains("\"error\":\"query: ")));
}

#[test]
fn image_mode_against_text_only_endpoint_fails_before_sending() {
    let s = MockServer::start(Mode::Constant("A".into()));
    let mut ep = s.endpoint("textonly");
    ep.supports_images = false;
    let exam = exam_with(&[(Category::AnomalyDetection, 2)], 2);
    let cfg = PromptConfig { modality: Modality::Image, ..PromptConfig::default() };
    assert!(matches!(evaluate(&exam, &ep, &cfg, None), Err(EvaluateError::Capability { .. })));
    assert_eq!(s.count(), 0);
}

#[test]
fn image_requests_carry_data_urls() {
    let s = MockServer::start(Mode::Constant("A".into()));
    let exam = exam_with(&[(Category::AnomalyDetection, 1)], 2);
    let cfg = PromptConfig { modality: Modality::Image, ..PromptConfig::default() };
    let run = evaluate(&exam, &s.endpoint("img"), &cfg, None).unwrap();
    assert_eq!(run.candidate, "img:image");
    let body = &s.bodies.lock().unwrap()[0];
    let parts = body["messages"][1]["content"].as_array().unwrap();
    let urls: Vec<&str> = parts.iter().filter_map(|p| p["image_url"]["url"].as_str()).collect();
    assert_eq!(urls.len(), 2);
    assert!(urls.iter().all(|u| u.starts_with("data:image/png;base64,iVBORw0KGgo")));
}

#[test]
fn modality_keeps_options_and_key() {
    let exam = exam_with(&[(Category::ComparativeAnalysis, 6)], 4);
    for it in &exam.items {
        let t = build_prompt(it, &PromptConfig::default()).unwrap();
        let i = build_prompt(it, &PromptConfig { modality: Modality::Image, ..PromptConfig::default() }).unwrap();
        assert_eq!(t.text_of(Block::Options), i.text_of(Block::Options));
    }
}
