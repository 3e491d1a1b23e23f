use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use realeq::syntax::{parse_bes, parse_formula_file, parse_plts, parse_res, print_formula_file};
use tempfile::TempDir;

fn samples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../samples")
}

fn sample(name: &str) -> String {
    samples().join(name).to_string_lossy().into_owned()
}

fn realeq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_realeq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 output")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &TempDir, name: &str, contents: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, contents).expect("temp file written");
    path.to_string_lossy().into_owned()
}

#[test]
fn solve_prints_exact_values() {
    let out = realeq(&["solve", &sample("intro.res")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out), "X = 32/5\nY = 17\n");
}

#[test]
fn solve_respects_equation_priority() {
    let out = realeq(&["solve", &sample("order.res")]);
    assert_eq!(stdout(&out), "X = -inf\nY = -inf\n");
    let out = realeq(&["solve", &sample("divergent.res")]);
    assert_eq!(stdout(&out), "X = inf\n");
}

#[test]
fn json_output_is_exact() {
    let out = realeq(&["solve", "--json", &sample("intro.res")]);
    assert_eq!(
        stdout(&out),
        "{\"solution\":[{\"var\":\"X\",\"value\":\"32/5\"},{\"var\":\"Y\",\"value\":\"17\"}],\"verified\":null}\n"
    );
    let out = realeq(&["solve", "--json", "--verify", &sample("intro.res")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        stdout(&out),
        "{\"solution\":[{\"var\":\"X\",\"value\":\"32/5\"},{\"var\":\"Y\",\"value\":\"17\"}],\"verified\":true}\n"
    );
}

#[test]
fn verify_passes_on_all_samples() {
    for name in ["intro.res", "order.res", "divergent.res"] {
        let out = realeq(&["solve", "--verify", "--jobs", "2", &sample(name)]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
    }
}

#[test]
fn trace_shows_substitution_and_propagation() {
    let out = realeq(&["solve", "--trace", &sample("intro.res")]);
    let text = stdout(&out);
    assert!(text.contains("# E3  X := "), "{text}");
    assert!(text.contains("# E4  Y = 17"), "{text}");
    assert!(text.ends_with("X = 32/5\nY = 17\n"), "{text}");
    // In JSON mode the derivation moves to standard error.
    let out = realeq(&["solve", "--trace", "--json", &sample("intro.res")]);
    assert!(stdout(&out).starts_with('{'));
    assert!(stderr(&out).contains("# E3"));
}

#[test]
fn open_system_exits_2() {
    let out = realeq(&["solve", &sample("open.res")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("`Z`"));
    assert!(stdout(&out).is_empty());
}

#[test]
fn parse_errors_exit_1_with_position() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.res", "res\nmu X = X \\/ ;\n");
    let out = realeq(&["solve", &bad]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("bad.res:2:"), "{}", stderr(&out));

    let odd = write(&dir, "odd.res", "res\nmu X = 0 - X;\n");
    assert_eq!(code(&realeq(&["solve", &odd])), 1);

    let dup = write(&dir, "dup.res", "res\nmu X = 0;\nnu X = 1;\n");
    assert_eq!(code(&realeq(&["solve", &dup])), 1);

    assert_eq!(code(&realeq(&["solve", "/nonexistent/file.res"])), 1);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&realeq(&["solve"])), 1);
    assert_eq!(code(&realeq(&["--cap", "10", "solve", &sample("intro.res")])), 1);
    assert_eq!(code(&realeq(&["bes", "--encoding", "const:1", &sample("alternating.bes")])), 1);
}

#[test]
fn term_blowup_exits_3() {
    let dir = TempDir::new().unwrap();
    let mut src = String::from("res\n");
    for i in 0..12 {
        src.push_str(&format!("mu Y{i} = {i};\nmu Z{i} = {};\n", -i));
    }
    let clauses: Vec<String> = (0..12).map(|i| format!("(2 * X + Y{i} \\/ Z{i})")).collect();
    src.push_str(&format!("nu X = {};\n", clauses.join(" /\\ ")));
    let path = write(&dir, "blow.res", &src);
    let out = realeq(&["--cap", "1000", "solve", &path]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn translate_then_solve_matches_expected_values() {
    let dir = TempDir::new().unwrap();
    for (name, expected) in [("a_sequence", "2"), ("loop_probability", "1/2"), ("reward", "10")] {
        let res = dir.path().join(format!("{name}.res")).to_string_lossy().into_owned();
        let out = realeq(&["translate", &sample(&format!("{name}.form")), &sample(&format!("{name}.plts")), "-o", &res]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
        assert!(stdout(&out).is_empty());
        let out = realeq(&["solve", "--verify", &res]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
        assert!(stdout(&out).contains(&format!("X_init = {expected}\n")), "{name}: {}", stdout(&out));
    }
}

#[test]
fn translate_sizes() {
    let out = realeq(&["translate", &sample("a_sequence.form"), &sample("a_sequence.plts")]);
    let system = parse_res(&stdout(&out)).expect("translated system parses");
    assert_eq!(system.len(), 13);

    let dir = TempDir::new().unwrap();
    let constant = write(&dir, "c.form", "form\n7\n");
    let out = realeq(&["translate", &constant, &sample("reward.plts")]);
    assert_eq!(stdout(&out), "res\nmu X_init = 7;\n");
}

#[test]
fn translate_semantic_errors_exit_5() {
    let dir = TempDir::new().unwrap();
    let unbound = write(&dir, "u.form", "form\nmu X . <a> Y\n");
    let out = realeq(&["translate", &unbound, &sample("a_sequence.plts")]);
    assert_eq!(code(&out), 5);
    assert!(stderr(&out).contains("error:"));

    let duplicate = write(&dir, "d.form", "form\nmu X . nu X . <a> X\n");
    assert_eq!(code(&realeq(&["translate", &duplicate, &sample("a_sequence.plts")])), 5);

    let bad_model = write(&dir, "m.plts", "plts\ninit s1:1;\ntrans s1 a -> s2:1/3, s3:1/3;\n");
    assert_eq!(code(&realeq(&["translate", &sample("a_sequence.form"), &bad_model])), 1);
}

#[test]
fn unknown_action_is_only_a_warning() {
    let dir = TempDir::new().unwrap();
    let phi = write(&dir, "z.form", "form\nmu X . <z> X \\/ 3\n");
    let out = realeq(&["translate", &phi, &sample("a_sequence.plts")]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning:"), "{}", stderr(&out));
}

#[test]
fn normalize_distributes_in_the_requested_direction() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "n.res", "res\nmu A = X \\/ (Y /\\ 2);\nmu B = 3;\n");
    let out = realeq(&["normalize", "--form", "cnf", &path]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out), "res\nmu A = (2 \\/ X) /\\ (X \\/ Y);\nmu B = 3;\n");
    let out = realeq(&["normalize", "--form", "dnf", &path]);
    assert_eq!(stdout(&out), "res\nmu A = 2 /\\ Y \\/ X;\nmu B = 3;\n");
}

#[test]
fn normalize_keeps_simple_guards() {
    let out = realeq(&["normalize", "--form", "cnf", &sample("distribute.res")]);
    let text = stdout(&out);
    assert!(text.contains("mu B = cond(X + -1, Y, 3);"), "{text}");
    parse_res(&text).expect("normal forms print as a valid system");
}

#[test]
fn bes_embeddings_agree() {
    let out = realeq(&["bes", &sample("alternating.bes")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("B2: direct false, embedded -inf\n"), "{text}");
    assert!(text.ends_with("agree\n"));

    let out = realeq(&["bes", "--encoding", "const:1,-1/2", &sample("alternating.bes")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("B2: direct false, embedded -1/2\n"));

    let dir = TempDir::new().unwrap();
    let trivial = write(&dir, "t.bes", "bes\nnu X = X;\n");
    assert_eq!(stdout(&realeq(&["bes", &trivial])), "X: direct true, embedded inf\nagree\n");
}

#[test]
fn bes_errors() {
    let out = realeq(&["bes", "--encoding", "const:0,1", &sample("alternating.bes")]);
    assert_eq!(code(&out), 5);
    let dir = TempDir::new().unwrap();
    let open = write(&dir, "o.bes", "bes\nmu X = X || Y;\n");
    assert_eq!(code(&realeq(&["bes", &open])), 2);
}

#[test]
fn output_is_deterministic() {
    for args in [
        vec!["solve", "--verify", "--trace"],
        vec!["normalize", "--form", "dnf"],
    ] {
        let mut full: Vec<&str> = args.clone();
        let path = sample("intro.res");
        full.push(&path);
        let a = realeq(&full);
        let b = realeq(&full);
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn emitted_files_round_trip() {
    let out = realeq(&["translate", &sample("loop_probability.form"), &sample("loop_probability.plts")]);
    let text = stdout(&out);
    assert_eq!(parse_res(&text).unwrap().to_string(), text);
    for name in ["a_sequence", "loop_probability", "reward"] {
        let form = fs::read_to_string(samples().join(format!("{name}.form"))).unwrap();
        assert_eq!(print_formula_file(&parse_formula_file(&form).unwrap()), form);
        let plts = fs::read_to_string(samples().join(format!("{name}.plts"))).unwrap();
        assert_eq!(parse_plts(&plts).unwrap().to_string(), plts);
    }
    let bes = fs::read_to_string(samples().join("alternating.bes")).unwrap();
    let parsed = parse_bes(&bes).unwrap();
    assert_eq!(parse_bes(&parsed.to_string()).unwrap(), parsed);
}
