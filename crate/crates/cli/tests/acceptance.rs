//! Acceptance suite: one PASS/FAIL line per criterion.

mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use support::sv::{self, Item};
use support::*;
use vl_core::analyzer::check_latches;
use vl_core::driver::{compile, CompileUnit, InputFile};
use vl_core::emitter::{ClockType, ResetType, UnitOutput};
use vl_core::syntax::ast::{Item as AstItem, ModuleItemKind};
use vl_core::syntax::{format, parse_expr_str, parse_source};
use vl_core::{Code, FileId};

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("tempdir")
}

fn read_sv(path: &Path) -> Result<Vec<sv::Module>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    sv::read(&text).map_err(|e| format!("{}: {e}", path.display()))
}

// 1 ------------------------------------------------------------------

const COUNTER_SV: &str = "// Counter
module Counter #(parameter WIDTH = 1)(input logic i_clk , input logic i_rst_n, output logic [WIDTH-1:0] o_cnt);
logic [WIDTH-1:0] r_cnt;
always_ff @ (posedge i_clk or negedge i_rst_n) begin
if (!i_rst_n) begin
r_cnt <= 0;
end else begin
r_cnt <= r_cnt + 1;
end
end
always_comb begin
o_cnt = r_cnt;
end
endmodule
";

fn counter_round_trip() -> Outcome {
    let t = tmp();
    let dir = project("counter", t.path());
    let start = Instant::now();
    let out = vl(&dir, &t.path().join("cache"), &["build"]);
    let elapsed = start.elapsed();
    ensure!(out.code == 0, "build exited {}: {}", out.code, out.stderr);
    ensure!(elapsed < Duration::from_secs(1), "build took {elapsed:?}");
    let emitted_path = dir.join("target/counter.sv");
    let text = std::fs::read_to_string(&emitted_path).map_err(|e| e.to_string())?;
    let emitted = read_sv(&emitted_path)?;
    let mut expected = sv::read(COUNTER_SV)?;
    expected[0].rename("i_rst_n", "i_rst");
    ensure!(emitted == expected, "structure differs:\n{emitted:#?}\nvs\n{expected:#?}");
    for needle in ["@ (posedge i_clk or negedge i_rst)", "if (!i_rst) begin", "r_cnt <= r_cnt + (1);", "o_cnt = r_cnt;"] {
        ensure!(text.contains(needle), "missing `{needle}`");
    }
    Ok(())
}

// 2 ------------------------------------------------------------------

fn build_with(dir: &Path, cache: &Path, clock: ClockType, reset: ResetType) -> Result<String, String> {
    let manifest = format!("[project]\nname = \"clock_reset\"\nversion = \"0.1.0\"\n\n[build]\nclock_type = \"{clock}\"\nreset_type = \"{reset}\"\n");
    std::fs::write(dir.join("vl.toml"), manifest).unwrap();
    let out = vl(dir, cache, &["build", "--out", "out"]);
    ensure!(out.code == 0, "{clock}/{reset}: exit {}: {}", out.code, out.stderr);
    std::fs::read_to_string(dir.join("out/module_a.sv")).map_err(|e| e.to_string())
}

fn process_lines(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| l.starts_with("always_ff") || l.starts_with("if (")).map(String::from).collect()
}

/// Text of the `n`th `always_ff` process through its closing `end`.
fn process_block(text: &str, n: usize) -> Option<String> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().enumerate().filter(|(_, l)| l.trim_start().starts_with("always_ff")).nth(n)?.0;
    let indent = &lines[start][..lines[start].len() - lines[start].trim_start().len()];
    let end = (start..lines.len()).find(|&i| lines[i] == format!("{indent}end"))?;
    Some(lines[start..=end].join("\n"))
}

fn clock_reset_matrix() -> Outcome {
    let t = tmp();
    let dir = project("clock_reset", t.path());
    let cache = t.path().join("cache");
    let listing = |a: [&str; 2]| -> Vec<String> {
        [a[0], a[1], "always_ff @ (negedge i_clk_b or posedge i_rst_b) begin", "if (i_rst_b) begin"].iter().map(|s| s.to_string()).collect()
    };
    let upper = build_with(&dir, &cache, ClockType::Posedge, ResetType::AsyncLow)?;
    let want = listing(["always_ff @ (posedge i_clk_a or negedge i_rst_a) begin", "if (!i_rst_a) begin"]);
    ensure!(process_lines(&upper) == want, "posedge/async_low: {:?}", process_lines(&upper));
    let lower = build_with(&dir, &cache, ClockType::Negedge, ResetType::SyncHigh)?;
    let want = listing(["always_ff @ (negedge i_clk_a) begin", "if (i_rst_a) begin"]);
    ensure!(process_lines(&lower) == want, "negedge/sync_high: {:?}", process_lines(&lower));

    let b_block = process_block(&upper, 1).ok_or("no second process")?;
    let a_start = upper.lines().position(|l| l.trim_start().starts_with("always_ff")).ok_or("no process")?;
    let base: Vec<&str> = upper.lines().collect();
    for clock in ClockType::ALL {
        for reset in ResetType::ALL {
            let text = build_with(&dir, &cache, clock, reset)?;
            ensure!(process_block(&text, 1).as_deref() == Some(b_block.as_str()), "{clock}/{reset}: `b process changed");
            let lines: Vec<&str> = text.lines().collect();
            ensure!(lines.len() == base.len(), "{clock}/{reset}: line count changed");
            for (i, (x, y)) in lines.iter().zip(&base).enumerate() {
                ensure!(x == y || i == a_start || i == a_start + 1, "{clock}/{reset}: line {} differs: `{x}`", i + 1);
            }
            let edge = if clock == ClockType::Posedge { "posedge" } else { "negedge" };
            let sens = match reset {
                ResetType::AsyncLow => format!("always_ff @ ({edge} i_clk_a or negedge i_rst_a) begin"),
                ResetType::AsyncHigh => format!("always_ff @ ({edge} i_clk_a or posedge i_rst_a) begin"),
                _ => format!("always_ff @ ({edge} i_clk_a) begin"),
            };
            let cond = if matches!(reset, ResetType::AsyncHigh | ResetType::SyncHigh) { "if (i_rst_a) begin" } else { "if (!i_rst_a) begin" };
            ensure!(lines[a_start].trim() == sens, "{clock}/{reset}: `{}`", lines[a_start].trim());
            ensure!(lines[a_start + 1].trim() == cond, "{clock}/{reset}: `{}`", lines[a_start + 1].trim());
        }
    }
    Ok(())
}

// 3 ------------------------------------------------------------------

fn queue_definitions(dir: &Path) -> Result<(Vec<String>, Vec<sv::Module>), String> {
    let mut modules = Vec::new();
    for (path, _) in tree(dir) {
        if path.ends_with(".sv") {
            modules.extend(read_sv(&dir.join(path))?);
        }
    }
    let queues = modules.iter().filter(|m| m.name.starts_with("SramQueue")).map(|m| m.name.clone()).collect();
    Ok((queues, modules))
}

fn insts(m: &sv::Module) -> Vec<(String, String)> {
    m.items
        .iter()
        .filter_map(|i| match i {
            Item::Inst { module, name, .. } => Some((name.clone(), module.clone())),
            _ => None,
        })
        .collect()
}

fn generics() -> Outcome {
    let t = tmp();
    let dir = project("generics", t.path());
    let cache = t.path().join("cache");
    let out = vl(&dir, &cache, &["build"]);
    ensure!(out.code == 0, "build exited {}: {}", out.code, out.stderr);
    let (queues, modules) = queue_definitions(&dir.join("target"))?;
    ensure!(queues.len() == 2, "expected two queue modules, found {queues:?}");
    ensure!(queues[0] != queues[1], "queue names collide");
    let test = modules.iter().find(|m| m.name == "Test").ok_or("no Test module")?;
    let got = insts(test);
    ensure!(got.len() == 2 && got[0].0 == "u0_queue" && got[1].0 == "u1_queue", "Test instances: {got:?}");
    let used: BTreeSet<&String> = got.iter().map(|(_, m)| m).collect();
    ensure!(used == queues.iter().collect(), "Test instantiates {used:?}, defined {queues:?}");
    let name_map = std::fs::read_to_string(dir.join("target/name_map.json")).map_err(|e| e.to_string())?;
    let map: serde_json::Value = serde_json::from_str(&name_map).map_err(|e| e.to_string())?;
    ensure!(map.as_object().is_some_and(|m| m.len() == 2), "name_map: {name_map}");

    let extra = "\nmodule Twice {\n    inst a: SramQueue::<SramVendorA>();\n    inst b: SramQueue::<SramVendorA>();\n    inst c: SramQueue::<SramVendorB>();\n}\n";
    let mut queue = std::fs::read_to_string(dir.join("src/queue.vl")).unwrap();
    queue.push_str(extra);
    std::fs::write(dir.join("src/queue.vl"), queue).unwrap();
    let out = vl(&dir, &cache, &["build", "--out", "again"]);
    ensure!(out.code == 0, "rebuild exited {}: {}", out.code, out.stderr);
    let (again, _) = queue_definitions(&dir.join("again"))?;
    ensure!(again == queues, "repeated (template, args) produced {again:?}");
    Ok(())
}

// 4 ------------------------------------------------------------------

fn diagnostics_corpus() -> Outcome {
    let required = [
        "E0201", "E0202", "E0204", "E0302", "E0303", "W0304", "W0305", "E0306", "E0307", "E0308", "E0311", "E0312", "E0313", "E0316",
    ];
    let t = tmp();
    let cache = t.path().join("cache");
    let fixtures = diagnostic_fixtures();
    let mut covered = BTreeSet::new();
    let mut clean = 0;
    let start = Instant::now();
    for (i, (name, text, expect)) in fixtures.iter().enumerate() {
        let dir = single_file_project(&t.path().join(format!("f{i}")), text);
        let out = vl(&dir, &cache, &["check", "--format", "json"]);
        let got = json_codes(&out.stdout).map_err(|e| format!("{name}: {e}"))?;
        match expect {
            Some((code, line, col)) => {
                ensure!(got == [(code.clone(), *line, *col)], "{name}: expected {code} at {line}:{col}, got {got:?}");
                let want_exit = if code.starts_with('W') { 0 } else { 1 };
                ensure!(out.code == want_exit, "{name}: exit {}", out.code);
                covered.insert(code.clone());
            }
            None => {
                ensure!(got.is_empty() && out.code == 0, "{name}: expected no diagnostics, got {got:?}");
                clean += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let missing: Vec<_> = required.iter().filter(|c| !covered.contains(**c)).collect();
    ensure!(missing.is_empty(), "no fixture for {missing:?}");
    ensure!(fixtures.len() - clean >= 14, "only {} negative fixtures", fixtures.len() - clean);
    ensure!(fixtures.iter().any(|(n, t, e)| e.is_none() && n.contains("cdc") && t.contains("unsafe (cdc)")), "no unsafe (cdc) fixture");
    ensure!(elapsed < Duration::from_secs(5), "corpus took {elapsed:?}");
    Ok(())
}

// 5 ------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Shape {
    Assign(usize),
    If(Vec<Shape>, Option<Vec<Shape>>),
}

fn shape_strategy() -> impl Strategy<Value = Vec<Shape>> {
    use proptest::collection::vec;
    let leaf = (0..2usize).prop_map(Shape::Assign);
    let tree = leaf.prop_recursive(3, 16, 3, |inner| {
        (vec(inner.clone(), 0..3), proptest::option::of(vec(inner, 0..3))).prop_map(|(t, e)| Shape::If(t, e))
    });
    vec(tree, 1..4)
}

fn ifs(b: &[Shape]) -> usize {
    b.iter().map(|s| if let Shape::If(t, e) = s { 1 + ifs(t) + e.as_deref().map_or(0, ifs) } else { 0 }).sum()
}

/// Renders with conditions `c0, c1, ...` in preorder.
fn render_shape(b: &[Shape], next: &mut usize, out: &mut String) {
    for s in b {
        match s {
            Shape::Assign(v) => out.push_str(&format!("{} = 1'b1; ", ["x", "y"][*v])),
            Shape::If(t, e) => {
                out.push_str(&format!("if c{} {{ ", *next));
                *next += 1;
                render_shape(t, next, out);
                out.push_str("} ");
                if let Some(e) = e {
                    out.push_str("else { ");
                    render_shape(e, next, out);
                    out.push_str("} ");
                }
            }
        }
    }
}

fn execute(b: &[Shape], conds: u32, next: &mut usize, assigned: &mut [bool; 2]) {
    for s in b {
        match s {
            Shape::Assign(v) => assigned[*v] = true,
            Shape::If(t, e) => {
                let c = *next;
                *next += 1;
                if conds >> c & 1 == 1 {
                    execute(t, conds, next, assigned);
                    *next += e.as_deref().map_or(0, ifs);
                } else {
                    *next += ifs(t);
                    if let Some(e) = e {
                        execute(e, conds, next, assigned);
                    }
                }
            }
        }
    }
}

fn latch_oracle() -> Outcome {
    let mut runner = TestRunner::deterministic();
    let strategy = shape_strategy().prop_filter("at most three conditions", |b| ifs(b) <= 3);
    let mut checked = 0;
    while checked < 200 {
        let block = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let n = ifs(&block);
        let runs: Vec<[bool; 2]> = (0..1u32 << n)
            .map(|conds| {
                let mut a = [false; 2];
                execute(&block, conds, &mut 0, &mut a);
                a
            })
            .collect();
        let oracle: BTreeSet<&str> =
            (0..2).filter(|&v| runs.iter().any(|r| r[v]) && !runs.iter().all(|r| r[v])).map(|v| ["x", "y"][v]).collect();

        let mut body = String::new();
        render_shape(&block, &mut 0, &mut body);
        let src = format!("module M (c0: input logic, c1: input logic, c2: input logic, x: output logic, y: output logic) {{ always_comb {{ {body}}} }}");
        let parsed = parse_source(&src, FileId(0));
        ensure!(parsed.diagnostics.is_empty(), "{src}: {:?}", parsed.diagnostics);
        let AstItem::Module(m) = &parsed.file.items[0] else { return Err("no module".into()) };
        let ModuleItemKind::AlwaysComb(comb) = &m.body[0].kind else { return Err("no always_comb".into()) };
        let found: BTreeSet<&str> = check_latches(&comb.body)
            .iter()
            .filter(|d| d.code == Code::W0305)
            .filter_map(|d| ["x", "y"].into_iter().find(|v| d.message.starts_with(&format!("`{v}`"))))
            .collect();
        ensure!(found == oracle, "{body}: analysis {found:?}, enumeration {oracle:?}");
        checked += 1;
    }
    Ok(())
}

// 6 ------------------------------------------------------------------

fn literal_oracle() -> Outcome {
    let mut cases = 0;
    for w in 1..=16u32 {
        for value in [(1u64 << w) - 1, 1u64 << w] {
            for lit in [format!("{w}'b{value:b}"), format!("{w}'d{value}"), format!("{w}'h{value:x}")] {
                let expr = parse_expr_str(&lit).map_err(|d| format!("{lit}: {d:?}"))?;
                let fired = vl_core::analyzer::check_literal_widths(&expr).iter().any(|d| d.code == Code::E0311);
                ensure!(fired == (value >= 1u64 << w), "{lit}: E0311 fired = {fired}");
                cases += 1;
            }
        }
    }
    ensure!(cases == 96, "{cases} cases");
    Ok(())
}

// 7 ------------------------------------------------------------------

fn codes_of(name: &str, text: &str) -> Vec<Code> {
    let unit = CompileUnit {
        name: "fixture".into(),
        deps: vec![],
        files: vec![InputFile { rel_path: name.into(), display: name.into(), text: text.into() }],
        output: UnitOutput { cfg: Default::default(), prefix: Default::default() },
    };
    let mut codes: Vec<Code> = compile(vec![unit]).diagnostics.iter().map(|d| d.code).collect();
    codes.sort();
    codes
}

fn formatter() -> Outcome {
    let mut formatted = 0;
    for path in all_sources() {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(&path).unwrap();
        let first = parse_source(&text, FileId(0));
        if first.diagnostics.iter().any(|d| d.is_error()) {
            continue;
        }
        let once = format(&first.file);
        let reparsed = parse_source(&once, FileId(0));
        ensure!(reparsed.diagnostics.is_empty(), "{name}: formatted text does not parse: {:?}", reparsed.diagnostics);
        let twice = format(&reparsed.file);
        ensure!(once == twice, "{name}: not idempotent");
        ensure!(codes_of(&name, &text) == codes_of(&name, &once), "{name}: diagnostics changed after formatting");
        formatted += 1;
    }
    ensure!(formatted >= 20, "only {formatted} sources formatted");

    let t = tmp();
    let cache = t.path().join("cache");
    for p in ["counter", "clock_reset", "generics", "sample_doc"] {
        let dir = project(p, t.path());
        let out = vl(&dir, &cache, &["fmt"]);
        ensure!(out.code == 0, "{p}: fmt exited {}: {}", out.code, out.stderr);
        let before = tree(&dir);
        let out = vl(&dir, &cache, &["fmt", "--check"]);
        ensure!(out.code == 0, "{p}: fmt --check after fmt exited {}: {}", out.code, out.stderr);
        ensure!(tree(&dir) == before, "{p}: fmt --check wrote files");
    }
    Ok(())
}

// 8 ------------------------------------------------------------------

fn determinism() -> Outcome {
    let t = tmp();
    let cache = t.path().join("cache");
    for p in ["counter", "clock_reset", "generics", "sample_doc"] {
        let dir = project(p, t.path());
        let mut snapshots: Vec<BTreeMap<String, Vec<u8>>> = Vec::new();
        let mut diags = Vec::new();
        for _ in 0..2 {
            let _ = std::fs::remove_dir_all(dir.join("target"));
            let b = vl(&dir, &cache, &["build", "--format", "json"]);
            let d = vl(&dir, &cache, &["doc", "--format", "json"]);
            let c = vl(&dir, &cache, &["check", "--format", "json"]);
            ensure!(p == "sample_doc" || b.code == 0, "{p}: build exited {}", b.code);
            ensure!(dir.join("target/doc/index.html").is_file(), "{p}: no doc index");
            diags.push((b.stdout, d.stdout, c.stdout));
            snapshots.push(tree(&dir.join("target")));
        }
        ensure!(snapshots[0] == snapshots[1], "{p}: outputs differ between runs");
        ensure!(diags[0] == diags[1], "{p}: diagnostics differ between runs");
        if p != "sample_doc" {
            ensure!(snapshots[0].keys().any(|k| k.ends_with(".sv")) && snapshots[0].contains_key("name_map.json"), "{p}: missing build outputs");
        }
    }

    let dir = t.path().join("corpus");
    std::fs::create_dir_all(dir.join("src")).unwrap();
    std::fs::write(dir.join("vl.toml"), "[project]\nname = \"corpus\"\nversion = \"0.1.0\"\n").unwrap();
    for (name, text, _) in diagnostic_fixtures() {
        if !name.starts_with("e00") && !name.starts_with("e0101") {
            std::fs::write(dir.join("src").join(name), text).unwrap();
        }
    }
    let a = vl(&dir, &cache, &["check", "--format", "json"]);
    let b = vl(&dir, &cache, &["check", "--format", "json"]);
    ensure!(a.stdout == b.stdout && a.stderr == b.stderr, "corpus diagnostics differ between runs");
    ensure!(json_codes(&a.stdout)?.len() > 14, "corpus produced too few diagnostics");
    Ok(())
}

// 9 ------------------------------------------------------------------

fn dependencies() -> Outcome {
    let t = tmp();
    let cache = t.path().join("cache");
    let lib = t.path().join("remote/sample");
    copy_dir(&fixtures().join("projects/sample_lib"), &lib);
    let url = git_repo(&lib, "v0.1.0");
    let user = project("sample_user", t.path());
    let manifest = std::fs::read_to_string(user.join("vl.toml")).unwrap().replace("@SAMPLE_URL@", &url);
    std::fs::write(user.join("vl.toml"), manifest).unwrap();

    let out = vl(&user, &cache, &["update"]);
    ensure!(out.code == 0, "update exited {}: {}", out.code, out.stderr);
    let lock = std::fs::read_to_string(user.join("vl.lock")).map_err(|e| e.to_string())?;
    let fields: Vec<&str> = lock.trim_end_matches('\n').split('\t').collect();
    ensure!(lock.lines().count() == 1 && lock.ends_with('\n'), "lock: {lock:?}");
    ensure!(fields.len() == 4 && fields[0] == url && fields[1] == "0.1.0" && fields[3] == "sample", "lock: {lock:?}");
    ensure!(fields[2].len() == 40 && fields[2].bytes().all(|b| b.is_ascii_hexdigit()), "revision: {}", fields[2]);

    let out = vl(&user, &cache, &["build"]);
    ensure!(out.code == 0, "build exited {}: {}", out.code, out.stderr);
    ensure!(user.join("target/dependencies/sample/sample.sv").is_file(), "dependency not emitted");
    let top = read_sv(&user.join("target/top.sv"))?;
    ensure!(insts(&top[0]) == [("u_sample".to_string(), "Sample".to_string())], "top instantiates {:?}", insts(&top[0]));
    let out = vl(&user, &cache, &["update"]);
    ensure!(out.code == 0 && std::fs::read_to_string(user.join("vl.lock")).unwrap() == lock, "relock changed vl.lock");

    // Take the remote away: a warm cache must need no fetch at all.
    let cached = tree(&cache);
    std::fs::rename(&lib, t.path().join("remote/gone")).unwrap();
    let _ = std::fs::remove_dir_all(user.join("target"));
    let out = vl(&user, &cache, &["build", "--offline"]);
    ensure!(out.code == 0, "offline build exited {}: {}", out.code, out.stderr);
    ensure!(user.join("target/dependencies/sample/sample.sv").is_file(), "offline build emitted nothing");
    let out = vl(&user, &cache, &["build"]);
    ensure!(out.code == 0, "locked build without remote exited {}: {}", out.code, out.stderr);
    ensure!(tree(&cache) == cached, "cache changed");
    ensure!(std::fs::read_to_string(user.join("vl.lock")).unwrap() == lock, "vl.lock changed");
    let cold = vl(&user, &t.path().join("cold"), &["build", "--offline"]);
    ensure!(cold.code == 2 && cold.stderr.contains("E0404"), "cold offline build: {} {}", cold.code, cold.stderr);

    let a = t.path().join("cycle/a");
    let b = t.path().join("cycle/b");
    let (a_url, b_url) = (format!("file://{}", a.display()), format!("file://{}", b.display()));
    for (dir, name, dep) in [(&a, "a", &b_url), (&b, "b", &a_url)] {
        std::fs::create_dir_all(dir.join("src")).unwrap();
        let m = format!("[project]\nname = \"{name}\"\nversion = \"0.1.0\"\n\n[dependencies]\n\"{dep}\" = \"0.1.0\"\n");
        std::fs::write(dir.join("vl.toml"), m).unwrap();
        std::fs::write(dir.join("src/top.vl"), format!("pub module {} {{}}\n", name.to_uppercase())).unwrap();
        git_repo(dir, "v0.1.0");
    }
    let out = vl(&a, &cache, &["check"]);
    ensure!(out.code == 2 && out.stderr.contains("E0405"), "cycle: exit {} {}", out.code, out.stderr);
    Ok(())
}

// 10 -----------------------------------------------------------------

const WAVE_FENCE: &str = "```wavedrom
{signal: [
  {name: 'i_clk', wave: 'p.....'},
  {name: 'i_dat', wave: 'x.=x..', data: ['data']},
  {name: 'o_dat', wave: 'x...=x.', data: ['data']},
]}
```";

fn table_rows<'a>(md: &'a str, heading: &str) -> Vec<Vec<&'a str>> {
    md.split(heading)
        .nth(1)
        .unwrap_or("")
        .lines()
        .skip_while(|l| !l.starts_with('|'))
        .take_while(|l| l.starts_with('|'))
        .skip(2)
        .map(|l| l.trim_matches('|').split('|').map(str::trim).collect())
        .collect()
}

fn docgen() -> Outcome {
    let t = tmp();
    let dir = project("sample_doc", t.path());
    let out = vl(&dir, &t.path().join("cache"), &["doc"]);
    ensure!(out.code != 2, "doc failed: {}", out.stderr);
    let md = std::fs::read_to_string(dir.join("target/doc/Sample.md")).map_err(|e| e.to_string())?;
    ensure!(md.contains(WAVE_FENCE), "wave fence not verbatim:\n{md}");
    let params = table_rows(&md, "## Parameters");
    ensure!(params == [vec!["WIDTH", "u32", "1", "Data Width"]], "parameter rows: {params:?}");
    let ports = table_rows(&md, "## Ports");
    let docs: Vec<&str> = ports.iter().map(|r| *r.last().unwrap_or(&"")).collect();
    let names: Vec<&str> = ports.iter().map(|r| r[0]).collect();
    ensure!(names == ["i_clk", "i_dat", "o_dat"] && docs == ["Clock", "Input Data", "Output Data"], "port rows: {ports:?}");

    let html = std::fs::read_to_string(dir.join("target/doc/Sample.html")).map_err(|e| e.to_string())?;
    let script = html.split("<script type=\"WaveDrom\">").nth(1).and_then(|s| s.split("</script>").next()).ok_or("no WaveDrom script element")?;
    ensure!(script.contains("{name: 'i_clk', wave: 'p.....'}"), "wave JSON missing from script: {script}");
    let index = std::fs::read_to_string(dir.join("target/doc/index.md")).map_err(|e| e.to_string())?;
    ensure!(index.contains("[Sample](Sample.md)"), "index: {index}");
    Ok(())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("counter round trip", counter_round_trip),
        ("clock/reset configuration matrix", clock_reset_matrix),
        ("generic monomorphization", generics),
        ("diagnostics corpus", diagnostics_corpus),
        ("latch-check oracle", latch_oracle),
        ("literal-width oracle", literal_oracle),
        ("formatter idempotency", formatter),
        ("determinism", determinism),
        ("dependencies", dependencies),
        ("docgen", docgen),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match result {
            Ok(()) => println!("PASS {:>2} {name}", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {e}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
