//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! two criteria that need the official shared-task data run only when
//! `EVENTGRAPH_OFFICIAL_DATA` points at a directory laid out as
//! `{en,pt,es}/{train,dev}.conll` (or `.jsonl` with
//! `EVENTGRAPH_OFFICIAL_FORMAT=jsonl`); the end-to-end run additionally
//! needs `EVENTGRAPH_OFFICIAL_EMBEDDINGS`, an embedding archive covering
//! every train and dev sentence.

use std::collections::BTreeSet;
use std::ops::ControlFlow;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use eventgraph::commands;
use eventgraph::config::{DataConfig, RunConfig};
use eventgraph::corpus_io::{load_corpus, CorpusFormat};
use eventgraph::graph_json::{parse_graph, serialize_graph};
use eventgraph::{read_archive, stats_table};
use eventgraph_core::embeddings::ToyEncoderConfig;
use eventgraph_core::graph::{encode, encode_tags};
use eventgraph_core::nn::{normal_init, zeros_like, Dropout, Params};
use eventgraph_core::parser::{predict, train, EncoderConfig, Input, LossWeights, Model, Targets, TrainSet};
use eventgraph_core::scorer::score_tags;
use eventgraph_core::synthetic::template_corpus;
use eventgraph_core::{
    compute_stats, decode_to_bio, AnnotatedSentence, BioTag, Flavor, Language, MacroAverage, Mat, ParserConfig,
    RoleLabel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FLAVORS: [Flavor; 3] = [Flavor::LabeledEdge, Flavor::NodeCentric, Flavor::NodeCentricSplit];

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// ---------------------------------------------------------------- generators

/// A valid BIO sequence of length 1–60 with 0–4 trigger chunks and
/// argument chunks of every role.
fn random_sequence(rng: &mut ChaCha8Rng) -> Vec<BioTag> {
    let n = rng.random_range(1..=60);
    let mut tags = vec![BioTag::O; n];
    let mut i = 0;
    let mut triggers_left = rng.random_range(0..=4usize);
    while i < n {
        if rng.random_bool(0.4) {
            i += 1;
            continue;
        }
        let role = if triggers_left > 0 && rng.random_bool(0.35) {
            triggers_left -= 1;
            RoleLabel::Trigger
        } else {
            RoleLabel::from_index(rng.random_range(1..7)).unwrap()
        };
        let len = rng.random_range(1..=4).min(n - i);
        tags[i] = BioTag::B(role);
        for t in &mut tags[i + 1..i + len] {
            *t = BioTag::I(role);
        }
        i += len;
    }
    tags
}

fn sentence(id: String, tags: Vec<BioTag>) -> AnnotatedSentence {
    let tokens = (0..tags.len()).map(|i| format!("w{i}")).collect();
    AnnotatedSentence::new(id, tokens, tags).unwrap().0
}

fn perturb<P: Params<f64>>(p: &mut P, rng: &mut ChaCha8Rng, std: f64) {
    for m in p.tensors_mut() {
        let noise: Mat<f64> = normal_init(rng, m.rows(), m.cols(), std);
        m.add_assign(&noise);
    }
}

// ------------------------------------------------------------------ criteria

fn round_trip() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    let mut failures = 0;
    let mut triggers = BTreeSet::new();
    let mut roles = BTreeSet::new();
    for k in 0..10_000 {
        let tags = random_sequence(&mut rng);
        triggers.insert(tags.iter().filter(|t| **t == BioTag::B(RoleLabel::Trigger)).count());
        roles.extend(tags.iter().filter_map(|t| t.role()));
        for flavor in FLAVORS {
            let g = encode_tags(&k.to_string(), &tags, flavor);
            let via_json = parse_graph(&serialize_graph(&g), 1).unwrap();
            if decode_to_bio(&g, None).0 != tags || decode_to_bio(&via_json, None).0 != tags {
                failures += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    check(
        failures == 0 && elapsed < Duration::from_secs(60) && roles.len() == 7 && triggers.len() == 5,
        format!(
            "10000 sequences x 3 flavors, {failures} failures, {} roles, trigger counts {triggers:?}, {:.1}s",
            roles.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn flavor_schema() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    let mut encode_failures = 0;
    for k in 0..10_000 {
        let tags = random_sequence(&mut rng);
        for flavor in FLAVORS {
            if encode_tags(&k.to_string(), &tags, flavor).validate_gold().is_err() {
                encode_failures += 1;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sentences: Vec<(usize, Mat<f32>)> = (0..50)
        .map(|_| {
            let n = rng.random_range(1..=30);
            (n, normal_init(&mut rng, n, 16, 1.0))
        })
        .collect();
    let (mut predict_failures, mut nodes, mut edges) = (0, 0, 0);
    for init in 0..100 {
        let flavor = FLAVORS[init % 3];
        let config = ParserConfig {
            query_dim: 16,
            n_heads: 2,
            query_ffn_dim: 32,
            n_query_layers: init % 3,
            queries_per_token: 1 + init % 2,
            seed: init as u64,
            ..ParserConfig::precomputed(flavor, 16)
        };
        let mut model: Model<f64> = Model::new(&config, None);
        // Fresh initializations mostly predict nothing; noise makes nodes,
        // overlaps, and competing triggers common.
        if init % 4 != 0 {
            perturb(&mut model, &mut rng, 0.5 + (init % 3) as f64);
        }
        for (k, (n, e)) in sentences.iter().enumerate() {
            let pred = predict(&model, &format!("p{k}"), Input::Embedded(e));
            let bio_ok = decode_to_bio(&pred.graph, Some(&pred.node_scores)).0.len() == *n;
            if pred.graph.validate().is_err() || !bio_ok {
                predict_failures += 1;
            }
            nodes += pred.graph.nodes.iter().filter(|n| !n.is_root).count();
            edges += pred.graph.edges.len();
        }
    }
    check(
        encode_failures == 0 && predict_failures == 0 && nodes > 0 && edges > 0,
        format!(
            "encode: 30000 graphs, {encode_failures} violations; predict: 100 inits x 50 sentences, \
             {predict_failures} violations ({nodes} nodes, {edges} edges)"
        ),
    )
}

/// `(sentence, role, start, end)` chunks by direct scan of the tag
/// strings.
fn oracle_chunks(sentence: usize, tags: &[String]) -> BTreeSet<(usize, String, usize, usize)> {
    let mut out = BTreeSet::new();
    for start in 0..tags.len() {
        let Some((kind, role)) = tags[start].split_once('-') else { continue };
        let inside = kind == "I" && start > 0 && tags[start - 1].split_once('-').map(|p| p.1) == Some(role);
        if inside {
            continue;
        }
        let end = (start + 1..tags.len()).find(|&j| tags[j] != format!("I-{role}")).unwrap_or(tags.len());
        out.insert((sentence, role.to_string(), start, end));
    }
    out
}

fn oracle_f1(gold: usize, pred: usize, correct: usize) -> f64 {
    let p = if pred == 0 { 0.0 } else { correct as f64 / pred as f64 };
    let r = if gold == 0 { 0.0 } else { correct as f64 / gold as f64 };
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn scorer_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let tag_string = |rng: &mut ChaCha8Rng| -> String {
        let role = RoleLabel::from_index(rng.random_range(0..7)).unwrap().as_str();
        match rng.random_range(0..6) {
            0..=2 => "O".to_string(),
            3 | 4 => format!("B-{role}"),
            _ => format!("I-{role}"),
        }
    };
    let mut mismatches = 0;
    for _ in 0..500 {
        let n_sent = rng.random_range(1..6);
        let mut gold_str = Vec::new();
        let mut pred_str = Vec::new();
        for _ in 0..n_sent {
            let len = rng.random_range(1..20);
            let g: Vec<String> = (0..len).map(|_| tag_string(&mut rng)).collect();
            let mut p = g.clone();
            for _ in 0..rng.random_range(0..4) {
                let at = rng.random_range(0..len);
                p[at] = tag_string(&mut rng);
            }
            gold_str.push(g);
            pred_str.push(p);
        }
        let gold: Vec<_> = gold_str
            .iter()
            .enumerate()
            .map(|(i, t)| sentence(i.to_string(), t.iter().map(|s| s.parse().unwrap()).collect()))
            .collect();
        let pred: Vec<Vec<BioTag>> = pred_str.iter().map(|t| t.iter().map(|s| s.parse().unwrap()).collect()).collect();
        let report = score_tags(&gold, &pred, MacroAverage::ObservedRoles).unwrap();

        let g: BTreeSet<_> = gold_str.iter().enumerate().flat_map(|(i, t)| oracle_chunks(i, t)).collect();
        let p: BTreeSet<_> = pred_str.iter().enumerate().flat_map(|(i, t)| oracle_chunks(i, t)).collect();
        let mut f1s = Vec::new();
        let mut ok = true;
        for role in RoleLabel::ALL {
            let of = |s: &BTreeSet<(usize, String, usize, usize)>| -> BTreeSet<_> {
                s.iter().filter(|c| c.1 == role.as_str()).cloned().collect()
            };
            let (gr, pr) = (of(&g), of(&p));
            let correct = gr.intersection(&pr).count();
            let s = report.role(role);
            ok &= (s.gold_support, s.pred_support, s.correct) == (gr.len(), pr.len(), correct);
            ok &= s.f1 == oracle_f1(gr.len(), pr.len(), correct);
            if gr.len() + pr.len() > 0 {
                f1s.push(oracle_f1(gr.len(), pr.len(), correct));
            }
        }
        let macro_f1 = if f1s.is_empty() { 0.0 } else { f1s.iter().sum::<f64>() / f1s.len() as f64 };
        ok &= (report.macro_f1 - macro_f1).abs() < 1e-12;
        ok &= report.micro.f1 == oracle_f1(g.len(), p.len(), g.intersection(&p).count());
        if !ok {
            mismatches += 1;
        }
    }

    let tags = |s: &str| -> Vec<BioTag> { s.split(' ').map(|t| t.parse().unwrap()).collect() };
    let hand = |g: &str, p: &str| {
        score_tags(&[sentence("h".into(), tags(g))], &[tags(p)], MacroAverage::ObservedRoles).unwrap()
    };
    let identity = hand("B-trigger I-trigger O B-place", "B-trigger I-trigger O B-place");
    let boundary = hand("B-trigger I-trigger O", "B-trigger O O");
    let spurious = hand("B-trigger O B-place O", "B-trigger O O B-target");
    let near = |a: f64, b: f64| (100.0 * a - b).abs() < 0.01;
    let hand_ok = near(identity.macro_f1, 100.0)
        && near(boundary.role(RoleLabel::Trigger).f1, 0.0)
        && near(boundary.macro_f1, 0.0)
        && near(spurious.role(RoleLabel::Trigger).f1, 100.0)
        && near(spurious.role(RoleLabel::Place).f1, 0.0)
        && near(spurious.role(RoleLabel::Target).f1, 0.0)
        && near(spurious.macro_f1, 33.33);
    check(
        mismatches == 0 && hand_ok,
        format!(
            "500 random pairs, {mismatches} mismatches; hand examples macro {:.2} / {:.2} / {:.2}",
            100.0 * identity.macro_f1,
            100.0 * boundary.macro_f1,
            100.0 * spurious.macro_f1
        ),
    )
}

fn worst_gradient_error(model: &mut Model<f64>, input: Input<'_>, targets: &Targets) -> f64 {
    let mut grad = zeros_like(model);
    model.accumulate_gradient(input, targets, &mut Dropout::eval(), &mut grad, 1.0);
    let analytic: Vec<Vec<f64>> = grad.named().iter().map(|(_, m)| m.as_slice().to_vec()).collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (t, g) in analytic.iter().enumerate() {
        for (e, &a) in g.iter().enumerate() {
            let x = model.tensors_mut()[t].as_slice()[e];
            model.tensors_mut()[t].as_mut_slice()[e] = x + h;
            let plus = model.loss(input, targets).total;
            model.tensors_mut()[t].as_mut_slice()[e] = x - h;
            let minus = model.loss(input, targets).total;
            model.tensors_mut()[t].as_mut_slice()[e] = x;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-5));
        }
    }
    worst
}

fn gradient_checks() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let terms = [
        ("node", LossWeights { node: 1.0, anchor: 0.0, edge_presence: 0.0, edge_label: 0.0 }),
        ("anchor", LossWeights { node: 0.0, anchor: 1.0, edge_presence: 0.0, edge_label: 0.0 }),
        ("edge-presence", LossWeights { node: 0.0, anchor: 0.0, edge_presence: 1.0, edge_label: 0.0 }),
        ("edge-label", LossWeights { node: 0.0, anchor: 0.0, edge_presence: 0.0, edge_label: 1.0 }),
        ("total", LossWeights::default()),
    ];
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let instances = 24;
    for i in 0..instances {
        let flavor = FLAVORS[i % 3];
        let n = rng.random_range(1..=5);
        let h = [4, 6, 8][i % 3];
        let mut tags = random_sequence(&mut rng);
        tags.truncate(n);
        eventgraph_core::repair_tags(&mut tags);
        if i % 2 == 0 {
            tags[0] = BioTag::B(RoleLabel::Trigger);
        }
        let s = sentence(format!("g{i}"), tags);
        let q = 1 + i % 2;
        let toy = i % 4 == 3;
        let config = ParserConfig {
            flavor,
            encoder: if toy {
                EncoderConfig::Toy(ToyEncoderConfig { dim: h, n_layers: 1, n_heads: 2, ffn_dim: h, dropout: 0.0, ..Default::default() })
            } else {
                EncoderConfig::Precomputed { dim: 5 }
            },
            query_dim: h,
            n_heads: 2,
            query_ffn_dim: h,
            n_query_layers: i % 3,
            queries_per_token: q,
            dropout: 0.0,
            seed: i as u64,
            ..ParserConfig::default()
        };
        let vocab = toy.then(|| eventgraph_core::Vocab::build(s.tokens.iter().map(String::as_str)));
        let mut model: Model<f64> = Model::new(&config, vocab.clone());
        perturb(&mut model, &mut rng, 0.3);
        let targets = Targets::from_graph(&encode(&s, flavor), q);
        let ids = vocab.as_ref().map(|v| v.ids(&s.tokens));
        let e: Mat<f32> = normal_init(&mut rng, n, 5, 1.0);
        let input = match &ids {
            Some(ids) => Input::Tokens(ids),
            None => Input::Embedded(&e),
        };
        for (name, weights) in terms {
            model.config.loss_weights = weights;
            let err = worst_gradient_error(&mut model, input, &targets);
            if err > worst {
                worst = err;
                worst_at = format!("instance {i} ({flavor}, n={n}, h={h}) {name}");
            }
        }
    }
    let elapsed = started.elapsed();
    check(
        worst <= 1e-4 && elapsed < Duration::from_secs(60),
        format!(
            "{instances} instances x 5 loss terms, worst relative error {worst:.2e} at {worst_at}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn synthetic_end_to_end() -> Outcome {
    let train_set = template_corpus(2000, 1, "train");
    let dev_set = template_corpus(200, 2, "dev");
    let mut ok = true;
    let mut details = Vec::new();
    for (flavor, threshold) in [(Flavor::NodeCentric, 0.95), (Flavor::LabeledEdge, 0.90), (Flavor::NodeCentricSplit, 0.90)] {
        let config = ParserConfig {
            flavor,
            encoder: EncoderConfig::Toy(ToyEncoderConfig { dim: 64, n_layers: 2, ..Default::default() }),
            epochs: 20,
            ..ParserConfig::default()
        };
        let started = Instant::now();
        let mut reached = None;
        let mut best: f64 = 0.0;
        let mut confident = (0, 0);
        let result = train::<f32>(
            TrainSet::tokens(&train_set),
            Some(TrainSet::tokens(&dev_set)),
            &config,
            |report, model| {
                let f1 = report.dev.as_ref().map_or(0.0, |d| d.macro_f1);
                best = best.max(f1);
                if f1 >= threshold && reached.is_none() {
                    reached = Some(report.epoch);
                }
                // For node-centric, keep going (within the same epoch budget)
                // until the templated trigger token's query is also a
                // confident trigger node.
                if flavor == Flavor::NodeCentric {
                    confident = trigger_confidence(model, &dev_set);
                }
                let confident_enough = flavor != Flavor::NodeCentric || confident.0 * 20 >= confident.1 * 19;
                if reached.is_some() && confident_enough {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            },
        );
        let elapsed = started.elapsed();
        if let Err(e) = result {
            return Outcome::Fail(format!("{flavor}: training failed: {e:?}"));
        }
        let in_budget = elapsed < Duration::from_secs(600);
        ok &= reached.is_some() && in_budget;
        let mut detail = match reached {
            Some(epoch) => format!("{flavor} >= {:.0} at epoch {epoch} (best {:.2}, {:.0}s)", 100.0 * threshold, 100.0 * best, elapsed.as_secs_f64()),
            None => format!("{flavor} best {:.2} < {:.0} after 20 epochs ({:.0}s)", 100.0 * best, 100.0 * threshold, elapsed.as_secs_f64()),
        };
        if flavor == Flavor::NodeCentric {
            ok &= confident.0 * 20 >= confident.1 * 19;
            detail.push_str(&format!(", trigger queries with p>0.9: {}/{}", confident.0, confident.1));
        }
        details.push(detail);
    }
    check(ok, details.join("; "))
}

/// Queries that gold assigns the trigger node (in node-centric graphs a
/// merged trigger node owns the query of its first token) and whose trigger
/// probability exceeds 0.9, out of all such queries.
fn trigger_confidence(model: &Model<f32>, dev: &[AnnotatedSentence]) -> (usize, usize) {
    let vocab = model.vocab.as_ref().unwrap();
    let trigger_class = 1 + RoleLabel::Trigger.index();
    let (mut confident, mut total) = (0, 0);
    for s in dev {
        let targets = Targets::from_graph(&encode(s, model.config.flavor), model.config.queries_per_token);
        let scores = model.scores(Input::Tokens(&vocab.ids(&s.tokens)));
        for (q, &class) in targets.node_class.iter().enumerate() {
            if class == trigger_class {
                total += 1;
                confident += usize::from(scores.node_probs[(q, trigger_class)] > 0.9);
            }
        }
    }
    (confident, total)
}

fn memorization() -> Outcome {
    let tokens = ["Thousands", "of", "teachers", "marched", "and", "rallied", "outside", "parliament", "in", "Pretoria", "on", "Tuesday"];
    let tags = "B-participant I-participant I-participant B-trigger O B-trigger B-target I-target O B-place O B-etime";
    let s = AnnotatedSentence::new(
        "memo",
        tokens.iter().map(|t| t.to_string()).collect(),
        tags.split(' ').map(|t| t.parse().unwrap()).collect(),
    )
    .unwrap()
    .0;
    let corpus = [s.clone()];
    let mut details = Vec::new();
    let mut ok = true;
    for flavor in FLAVORS {
        let gold = encode(&s, flavor);
        let config = ParserConfig { flavor, epochs: 500, batch_size: 1, ..ParserConfig::default() };
        let mut at = None;
        let trained = train::<f32>(TrainSet::tokens(&corpus), None, &config, |r, m| {
            if m.predict_sentence(&s, None).unwrap().graph == gold {
                at = Some(r.steps);
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        ok &= trained.is_ok() && at.is_some();
        details.push(match at {
            Some(steps) => format!("{flavor} exact after {steps} steps"),
            None => format!("{flavor} not reproduced in 500 steps"),
        });
    }
    check(ok, details.join("; "))
}

struct OfficialData {
    root: PathBuf,
    format: CorpusFormat,
}

fn official_data() -> Option<OfficialData> {
    let root = PathBuf::from(std::env::var_os("EVENTGRAPH_OFFICIAL_DATA")?);
    let format = match std::env::var("EVENTGRAPH_OFFICIAL_FORMAT").as_deref() {
        Ok("jsonl") => CorpusFormat::Jsonl,
        _ => CorpusFormat::Conll,
    };
    Some(OfficialData { root, format })
}

impl OfficialData {
    fn split(&self, lang: Language, split: &str) -> PathBuf {
        let ext = match self.format {
            CorpusFormat::Conll => "conll",
            CorpusFormat::Jsonl => "jsonl",
        };
        self.root.join(lang.code()).join(format!("{split}.{ext}"))
    }

    fn load(&self, path: &Path) -> Vec<AnnotatedSentence> {
        load_corpus(path, self.format).unwrap_or_else(|e| panic!("{}: {e}", path.display())).sentences
    }
}

fn official_stats() -> Outcome {
    let Some(data) = official_data() else {
        return Outcome::Skip("EVENTGRAPH_OFFICIAL_DATA not set".into());
    };
    // (articles, sentences) for train and dev, then role counts over both,
    // in trigger, participant, place, target, organizer, etime, fname order.
    let expected: [(Language, [(usize, usize); 2], [usize; 7]); 3] = [
        (Language::En, [(732, 2925), (76, 323)], [4595, 2663, 1570, 1470, 1261, 1209, 1201]),
        (Language::Pt, [(29, 78), (4, 9)], [122, 73, 61, 32, 19, 41, 48]),
        (Language::Es, [(29, 91), (1, 15)], [157, 88, 15, 64, 25, 40, 49]),
    ];
    let mut mismatches = Vec::new();
    for (lang, splits, roles) in expected {
        let mut both = Vec::new();
        for (split, (articles, sentences)) in ["train", "dev"].into_iter().zip(splits) {
            let path = data.split(lang, split);
            // Goes through the same code path as `eventgraph stats`.
            let table = commands::stats(std::slice::from_ref(&path), data.format, None).unwrap();
            let corpus = data.load(&path);
            let got = compute_stats(&corpus);
            let row = format!("{articles} ({})", thousands(sentences));
            if (got.n_articles, got.n_sentences) != (articles, sentences) || !table.contains(&row) {
                mismatches.push(format!("{} {split}: {} ({})", lang.code(), got.n_articles, got.n_sentences));
            }
            both.extend(corpus);
        }
        let columns = stats_table::language_columns(&both);
        let got = &columns[0].stats;
        for (role, want) in RoleLabel::ALL.into_iter().zip(roles) {
            if got.count(role) != want {
                mismatches.push(format!("{} {role}: {} != {want}", lang.code(), got.count(role)));
            }
        }
    }
    check(mismatches.is_empty(), if mismatches.is_empty() { "all counts match".into() } else { mismatches.join(", ") })
}

fn thousands(n: usize) -> String {
    if n >= 1000 {
        format!("{},{:03}", n / 1000, n % 1000)
    } else {
        n.to_string()
    }
}

fn official_end_to_end() -> Outcome {
    let Some(data) = official_data() else {
        return Outcome::Skip("EVENTGRAPH_OFFICIAL_DATA not set".into());
    };
    let Some(archive) = std::env::var_os("EVENTGRAPH_OFFICIAL_EMBEDDINGS").map(PathBuf::from) else {
        return Outcome::Skip("EVENTGRAPH_OFFICIAL_EMBEDDINGS not set".into());
    };
    let dim = match read_archive(&archive) {
        Ok(a) => eventgraph_core::EmbeddingSource::dim(&a).unwrap_or(0),
        Err(e) => return Outcome::Fail(format!("cannot read archive: {e}")),
    };
    let epochs = std::env::var("EVENTGRAPH_OFFICIAL_EPOCHS").ok().and_then(|e| e.parse().ok()).unwrap_or(1);
    let dir = tempfile::tempdir().unwrap();
    // Joint training over the three languages; the dev report covers the
    // English dev split.
    let train_path = dir.path().join("train.conll");
    let mut train_all = Vec::new();
    for lang in Language::ALL {
        train_all.extend(data.load(&data.split(lang, "train")));
    }
    std::fs::write(&train_path, eventgraph::corpus_io::write_conll(&train_all)).unwrap();
    let config = RunConfig {
        data: DataConfig {
            train: Some(train_path),
            dev: Some(data.split(Language::En, "dev")),
            format: CorpusFormat::Conll,
            embeddings: Some(archive),
            output_dir: dir.path().join("run"),
        },
        parser: ParserConfig { epochs, ..ParserConfig::precomputed(Flavor::NodeCentric, dim) },
    };
    let mut config = config;
    if data.format == CorpusFormat::Jsonl {
        // The dev split stays in its original format; convert it too.
        let dev = data.load(&data.split(Language::En, "dev"));
        let dev_path = dir.path().join("dev.conll");
        std::fs::write(&dev_path, eventgraph::corpus_io::write_conll(&dev)).unwrap();
        config.data.dev = Some(dev_path);
    }
    match commands::train_run(&config) {
        Ok(summary) => {
            let report = std::fs::read_to_string(dir.path().join("run/dev_report.txt")).unwrap_or_default();
            let header_ok = report.lines().next().is_some_and(|l| l.starts_with("role"));
            let macro_ok = report.lines().any(|l| l.starts_with("macro"));
            check(
                header_ok && macro_ok && summary.dev.is_some(),
                format!(
                    "{} epoch(s), English dev macro-F1 {:.2} (no target value claimed)",
                    summary.epochs,
                    100.0 * summary.dev.map_or(0.0, |d| d.macro_f1)
                ),
            )
        }
        Err(e) => Outcome::Fail(format!("training failed: {e}")),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("round-trip suite", round_trip),
        ("flavor-schema suite", flavor_schema),
        ("scorer oracle", scorer_oracle),
        ("gradient checks", gradient_checks),
        ("synthetic end-to-end", synthetic_end_to_end),
        ("memorization", memorization),
        ("official data statistics", official_stats),
        ("official data end-to-end", official_end_to_end),
    ];
    // Keep panics from interleaving backtraces with the report lines.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {name}: {detail}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
