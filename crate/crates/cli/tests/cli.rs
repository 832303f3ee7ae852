use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn driftdet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftdet"))
        .args(args)
        .env_remove("DRIFTDET_PROVIDER_URL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const MOVIE_WORDS: &[&str] = &["film", "actor", "plot", "scene", "director", "cinema", "sequel", "cast", "script", "camera"];
const FOOD_WORDS: &[&str] = &["pizza", "waiter", "menu", "dessert", "chef", "kitchen", "salad", "steak", "sushi", "coffee"];

fn corpus_lines(words: &[&str], n: usize) -> String {
    (0..n)
        .map(|i| {
            let doc: Vec<&str> = (0..12).map(|j| words[(i * 7 + j * 3) % words.len()]).collect();
            doc.join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn trained_model(dir: &Path) -> PathBuf {
    let corpus = write(dir, "train.txt", &corpus_lines(MOVIE_WORDS, 40));
    let model = dir.join("model");
    let out = driftdet(&["train", "--corpus", s(&corpus), "--out", s(&model), "--model", "centroid", "--dim", "16"]);
    assert!(out.status.success(), "{}", stderr(&out));
    model
}

#[test]
fn train_writes_model_directory() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path());
    for file in ["manifest.json", "tensors.bin", "vocab.txt"] {
        assert!(model.join(file).exists(), "{file} missing");
    }
}

#[test]
fn train_json_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write(dir.path(), "train.txt", &corpus_lines(MOVIE_WORDS, 30));
    let run = |name: &str| {
        let out = driftdet(&[
            "train", "--corpus", s(&corpus), "--out", s(&dir.path().join(name)), "--model", "centroid", "--dim", "8", "--json",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let mut v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
        v.as_object_mut().unwrap().remove("model_dir");
        v
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert_eq!(a["n_documents"], 30);
    assert_eq!(
        fs::read(dir.path().join("a/tensors.bin")).unwrap(),
        fs::read(dir.path().join("b/tensors.bin")).unwrap()
    );
}

#[test]
fn missing_corpus_reports_file_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let out = driftdet(&["train", "--corpus", "/nonexistent/corpus.txt", "--out", s(&dir.path().join("m")), "--model", "centroid"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("FileNotFound"), "{}", stderr(&out));
}

#[test]
fn gmm_on_tiny_corpus_reports_insufficient_data() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write(dir.path(), "tiny.txt", &corpus_lines(MOVIE_WORDS, 3));
    let out = driftdet(&["train", "--corpus", s(&corpus), "--out", s(&dir.path().join("m")), "--model", "gmm", "--dim", "8"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("InsufficientData"), "{}", stderr(&out));
}

#[test]
fn empty_payload_reports_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path());
    let payload = write(dir.path(), "empty.txt", "\n\n");
    let out = driftdet(&["score", "--model", s(&model), "--payload", s(&payload)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("EmptyCorpus"), "{}", stderr(&out));
}

#[test]
fn score_json_lines_parse() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path());
    let mut text = corpus_lines(MOVIE_WORDS, 3);
    text.push('\n');
    text.push_str(&corpus_lines(FOOD_WORDS, 3));
    let payload = write(dir.path(), "payload.txt", &text);
    let out = driftdet(&["score", "--model", s(&model), "--payload", s(&payload), "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines: Vec<serde_json::Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 6);
    for v in &lines {
        assert_eq!(v["schema_version"], 1);
        let score = v["score"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&score));
        assert_eq!(v["drifted"].as_bool().unwrap(), score < v["threshold"].as_f64().unwrap());
    }
    assert!(stderr(&out).contains("drift rate"));
}

#[test]
fn score_text_output_has_one_line_per_document() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path());
    let payload = write(dir.path(), "payload.txt", &corpus_lines(FOOD_WORDS, 4));
    let out = driftdet(&["score", "--model", s(&model), "--payload", s(&payload), "--threshold", "0.5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("doc-")).count(), 4);
    assert!(text.contains("drift rate"));
}

#[test]
fn explain_rejects_zero_top_k() {
    let out = driftdet(&["explain", "--model", "m", "--payload", "p", "--top-k", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn explain_marks_words_without_colour_off_tty() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path());
    let payload = write(dir.path(), "payload.txt", "film actor pizza waiter scene");
    let out = driftdet(&["explain", "--model", s(&model), "--payload", s(&payload), "--threshold", "0.9999", "--top-k", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(!text.contains('\x1b'));
    assert!(text.contains("[[") || text.contains("no positive contributors") || text.contains("not drifted"), "{text}");

    let out = driftdet(&[
        "explain", "--model", s(&model), "--payload", s(&payload), "--threshold", "0.9999", "--json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["schema_version"], 1);
}

const CONLLU: &str = "\
1\tThe\tthe\tDET\tDT\t_\t2\tdet\t_\t_
2\tdog\tdog\tNOUN\tNN\t_\t3\tnsubj\t_\t_
3\truns\trun\tVERB\tVBZ\t_\t0\troot\t_\t_
4\tquickly\tquickly\tADV\tRB\t_\t3\tadvmod\t_\t_

1\tShe\tshe\tPRON\tPRP\t_\t2\tnsubj\t_\t_
2\tbought\tbuy\tVERB\tVBD\t_\t0\troot\t_\t_
3\ta\ta\tDET\tDT\t_\t5\tdet\t_\t_
4\tred\tred\tADJ\tJJ\t_\t5\tamod\t_\t_
5\tcar\tcar\tNOUN\tNN\t_\t2\tobj\t_\t_

";

#[test]
fn identical_stats_have_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "train.conllu", CONLLU);
    let payload = write(dir.path(), "payload.conllu", CONLLU);
    let report = dir.path().join("report.json");
    let out = driftdet(&["stats", "--train", s(&train), "--payload", s(&payload), "--out", s(&report), "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v, serde_json::from_str::<serde_json::Value>(&stdout(&out)).unwrap());
    for key in ["ner_shares", "dep_shares"] {
        for row in v[key].as_array().unwrap() {
            assert_eq!(row["delta"].as_f64().unwrap(), 0.0, "{row}");
        }
    }
    assert!(v["new_sentence_rules"].as_array().unwrap().is_empty());
    assert!(v["verb_patterns"]["new_patterns"].as_array().unwrap().is_empty());
}

#[test]
fn stats_text_report_and_missing_chunker_note() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "train.conllu", CONLLU);
    let out = driftdet(&[
        "stats", "--train", s(&train), "--payload", s(&train), "--chunker", s(&dir.path().join("absent.txt")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Verb Neighbourhood Patterns"), "{text}");
    assert!(text.contains("not found"), "{text}");
}

#[test]
fn eval_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let iid = write(dir.path(), "movies.txt", &corpus_lines(MOVIE_WORDS, 40));
    let ood = write(dir.path(), "food.txt", &corpus_lines(FOOD_WORDS, 20));
    let csv = dir.path().join("results.csv");
    let out = driftdet(&[
        "eval", "--iid", s(&iid), "--ood", s(&ood), "--model", "centroid", "--dim", "16", "--thresholds", "0.5,0.9,0.995",
        "--csv", s(&csv),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, driftdet::eval::CSV_HEADER.join(","));
    assert!(text.contains("movies-vs-food"));
    assert!(stdout(&out).contains("best threshold"));
}

#[test]
fn config_file_supplies_defaults_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write(dir.path(), "train.txt", &corpus_lines(MOVIE_WORDS, 20));
    let model = dir.path().join("model");
    let config = write(
        dir.path(),
        "run.toml",
        &format!(
            "model_dir = {:?}\n[pipeline]\nmodel_kind = \"centroid\"\n[pipeline.backend]\nkind = \"native-skipgram\"\n[pipeline.backend.skipgram]\ndim = 8\nwindow = 2\nnegatives = 2\nepochs = 1\nmin_count = 1\nlearning_rate = 0.025\nshards = 1\nseed = 1\n[corpus]\npath = {:?}\n",
            s(&model),
            s(&corpus)
        ),
    );
    let out = driftdet(&["--config", s(&config), "train"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(model.join("manifest.json").exists());

    let bad = write(dir.path(), "bad.toml", "[pipeline]\nmodel_kind = \"centroid\"\nbogus = 1\n");
    let out = driftdet(&["--config", s(&bad), "train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ConfigError"), "{}", stderr(&out));
}
