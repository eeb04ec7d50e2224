use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use treenum::aggregates::{
    brute_force_aggregate, parameterize, AggregateEngine, CountSum, Counting, MaxPlus, Semiring, SEMIRINGS,
};
use treenum::automaton::{brute_force_answers, example_automata, parse_automaton, Assignment, TreeAutomaton, VarSet};
use treenum::engine::{Engine, EngineOptions};
use treenum::tree::{LabelId, LabeledTree, NodeId, Relabeling};

/// Enumerate and maintain the answers of a tree automaton query.
#[derive(Parser, Debug)]
#[command(name = "treenum", version)]
struct Args {
    /// Tree document (JSON).
    #[arg(long)]
    tree: PathBuf,
    /// Automaton document (JSON), or `catalog:NAME` for a built-in automaton.
    #[arg(long)]
    automaton: String,
    /// Command script; defaults to a single `enumerate`.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Semiring used by `aggregate` without an argument.
    #[arg(long, default_value = "count")]
    semiring: String,
    /// Node weights, one `node_id value` per line.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Build the circuit on the input tree without rebalancing it.
    #[arg(long)]
    no_balance: bool,
    /// Check every output against brute force (small inputs only).
    #[arg(long)]
    oracle_check: bool,
    /// Print per-command counters to stderr at the end.
    #[arg(long)]
    bench: bool,
    /// Treat the first K free variables as parameters set by `set-params`.
    #[arg(long, default_value_t = 0)]
    params: usize,
}

#[derive(Debug, Default)]
struct BenchRow {
    command: String,
    outputs: usize,
    max_steps: usize,
    touched_gates: usize,
    touched_forest: usize,
}

trait DynAggregate {
    fn relabel(&mut self, r: Relabeling) -> Result<usize, String>;
    fn set_weight(&mut self, n: NodeId, raw: &str) -> Result<usize, String>;
    fn value(&self) -> String;
    fn check(&self, a: &dyn TreeAutomaton, z: &VarSet) -> Result<(), String>;
}

impl<S: Semiring> DynAggregate for AggregateEngine<S> {
    fn relabel(&mut self, r: Relabeling) -> Result<usize, String> {
        AggregateEngine::relabel(self, r).map_err(|e| e.to_string())?;
        Ok(self.last_touched())
    }

    fn set_weight(&mut self, n: NodeId, raw: &str) -> Result<usize, String> {
        let w = self.semiring().parse_weight(raw).map_err(|e| e.to_string())?;
        AggregateEngine::set_weight(self, n, w).map_err(|e| e.to_string())?;
        Ok(self.last_touched())
    }

    fn value(&self) -> String {
        self.semiring().format(&AggregateEngine::value(self))
    }

    fn check(&self, a: &dyn TreeAutomaton, z: &VarSet) -> Result<(), String> {
        let t = self.tree();
        let weights: Vec<S::Elem> = t.nodes().map(|n| self.weight(n).clone()).collect();
        let want = brute_force_aggregate(self.semiring(), &a, t, z, &weights).map_err(|e| e.to_string())?;
        let got = AggregateEngine::value(self);
        if approx_equal(&self.semiring().format(&got), &self.semiring().format(&want)) {
            Ok(())
        } else {
            Err(format!("oracle mismatch: got {got:?}, expected {want:?}"))
        }
    }
}

/// Field-wise comparison of formatted values, numbers within 1e-9 relative.
fn approx_equal(a: &str, b: &str) -> bool {
    let (fa, fb): (Vec<_>, Vec<_>) = (a.split(' ').collect(), b.split(' ').collect());
    fa.len() == fb.len()
        && fa.iter().zip(&fb).all(|(x, y)| match (x.parse::<f64>(), y.parse::<f64>()) {
            (Ok(x), Ok(y)) => (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0),
            _ => x == y,
        })
}

struct Session<A: TreeAutomaton> {
    a: A,
    z: VarSet,
    opts: EngineOptions,
    engine: Engine,
    aggregates: BTreeMap<String, Box<dyn DynAggregate>>,
    weights: HashMap<i64, String>,
    default_semiring: String,
    params: Vec<LabelId>,
    current: Vec<Option<NodeId>>,
    oracle: bool,
    rows: Vec<BenchRow>,
    out: String,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

impl<A: TreeAutomaton> Session<A> {
    fn tree(&self) -> &LabeledTree {
        self.engine.tree()
    }

    fn node(&self, tok: &str) -> Result<NodeId, String> {
        let id: i64 = tok.parse().map_err(|_| format!("bad node id {tok:?}"))?;
        self.tree().node_by_ext_id(id).ok_or_else(|| format!("unknown node {id}"))
    }

    fn format_answer(&self, a: &Assignment) -> String {
        if a.is_empty() {
            return "{}".into();
        }
        let t = self.tree();
        let parts: Vec<String> =
            a.iter().map(|s| format!("{}:{}", self.z.enum_vars[s.var as usize], t.ext_id(s.node))).collect();
        parts.join(" ")
    }

    fn relabel(&mut self, r: Relabeling, row: &mut BenchRow) -> Result<(), String> {
        let rep = self.engine.relabel(r).map_err(err)?;
        row.touched_gates += rep.touched_gates;
        row.touched_forest += rep.touched_forest;
        for agg in self.aggregates.values_mut() {
            agg.relabel(r)?;
        }
        Ok(())
    }

    fn aggregate(&mut self, name: &str) -> Result<&mut Box<dyn DynAggregate>, String> {
        if !self.aggregates.contains_key(name) {
            let agg: Box<dyn DynAggregate> = match name {
                "count" => Box::new(self.build_aggregate(Counting)?),
                "tropical" => Box::new(self.build_aggregate(MaxPlus)?),
                "pair-count-sum" => Box::new(self.build_aggregate(CountSum)?),
                _ => return Err(format!("unknown semiring {name:?}; known: {}", SEMIRINGS.join(", "))),
            };
            self.aggregates.insert(name.to_string(), agg);
        }
        Ok(self.aggregates.get_mut(name).expect("just inserted"))
    }

    fn build_aggregate<S: Semiring>(&self, s: S) -> Result<AggregateEngine<S>, String> {
        let t = self.tree();
        let mut w = Vec::with_capacity(t.len());
        for n in t.nodes() {
            w.push(match self.weights.get(&t.ext_id(n)) {
                Some(raw) => s.parse_weight(raw).map_err(err)?,
                None => s.one(),
            });
        }
        AggregateEngine::new(s, t, &self.a, &self.z, Some(w), self.opts).map_err(err)
    }

    fn enumerate(&mut self, limit: Option<usize>, row: &mut BenchRow) -> Result<(), String> {
        let mut cur = self.engine.cursor();
        let mut seen = BTreeSet::new();
        let mut count = 0;
        while limit.is_none_or(|l| count < l) {
            let Some(a) = self.engine.next_answer(&mut cur).map_err(err)? else { break };
            let line = self.format_answer(&a);
            writeln!(self.out, "{line}").expect("writing to a string");
            count += 1;
            if self.oracle && !seen.insert(a) {
                return Err(format!("duplicate answer {line} in the enumeration"));
            }
        }
        row.outputs = count;
        row.max_steps = cur.max_steps();
        if self.oracle {
            let want = brute_force_answers(&self.a, self.tree(), &self.z).map_err(err)?;
            let complete = limit.is_none_or(|l| count < l);
            if !seen.is_subset(&want) || (complete && seen.len() != want.len()) {
                return Err(format!("oracle mismatch: enumerated {count} answers, expected {}", want.len()));
            }
        }
        Ok(())
    }

    fn set_params(&mut self, toks: &[&str], row: &mut BenchRow) -> Result<(), String> {
        if self.params.is_empty() {
            return Err("set-params needs --params".into());
        }
        if toks.len() != self.params.len() {
            return Err(format!("expected {} parameter nodes, got {}", self.params.len(), toks.len()));
        }
        let nodes = toks.iter().map(|t| self.node(t)).collect::<Result<Vec<_>, _>>()?;
        for (i, &n) in nodes.iter().enumerate() {
            if self.current[i] == Some(n) {
                continue;
            }
            if let Some(old) = self.current[i].take() {
                self.relabel(Relabeling { node: old, label: self.params[i] }, row)?;
            }
            self.relabel(Relabeling { node: n, label: self.params[i] }, row)?;
            self.current[i] = Some(n);
        }
        Ok(())
    }

    fn run_command(&mut self, line: &str) -> Result<BenchRow, String> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let mut row = BenchRow { command: toks.join(" "), ..Default::default() };
        match toks.as_slice() {
            ["enumerate"] => self.enumerate(None, &mut row)?,
            ["enumerate", l] => {
                let l = l.parse().map_err(|_| format!("bad limit {l:?}"))?;
                self.enumerate(Some(l), &mut row)?
            }
            ["relabel", n, l] => {
                let node = self.node(n)?;
                let label = self.tree().label_id(l).ok_or_else(|| format!("unknown label {l:?}"))?;
                self.relabel(Relabeling { node, label }, &mut row)?
            }
            ["count"] => self.print_aggregate("count", &mut row)?,
            ["aggregate"] => {
                let name = self.default_semiring.clone();
                self.print_aggregate(&name, &mut row)?
            }
            ["aggregate", name] => self.print_aggregate(name, &mut row)?,
            ["set-params", nodes @ ..] => self.set_params(nodes, &mut row)?,
            ["set-weight", n, v] => {
                let node = self.node(n)?;
                let id = self.tree().ext_id(node);
                self.weights.insert(id, v.to_string());
                for agg in self.aggregates.values_mut() {
                    row.touched_gates += agg.set_weight(node, v)?;
                }
            }
            ["bench-report"] => {
                let report = bench_csv(&self.rows);
                self.out.push_str(&report);
            }
            _ => return Err(format!("unknown command {line:?}")),
        }
        Ok(row)
    }

    fn print_aggregate(&mut self, name: &str, row: &mut BenchRow) -> Result<(), String> {
        let oracle = self.oracle;
        let agg = self.aggregate(name)?;
        let v = agg.value();
        if oracle {
            let agg = &self.aggregates[name];
            agg.check(&self.a, &self.z)?;
        }
        row.outputs = 1;
        writeln!(self.out, "{v}").expect("writing to a string");
        Ok(())
    }

    fn flush(&mut self) {
        let mut stdout = std::io::stdout().lock();
        let _ = stdout.write_all(self.out.as_bytes());
        let _ = stdout.flush();
        self.out.clear();
    }
}

fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("command,outputs,max_steps_per_output,touched_gates,touched_forest_vertices\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.command, r.outputs, r.max_steps, r.touched_gates, r.touched_forest);
    }
    s
}

fn read(path: &PathBuf) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_weights(text: &str) -> Result<HashMap<i64, String>, String> {
    let mut w = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [id, v] = toks.as_slice() else { return Err(format!("weights line {}: expected `node_id value`", i + 1)) };
        let id: i64 = id.parse().map_err(|_| format!("weights line {}: bad node id {id:?}", i + 1))?;
        w.insert(id, v.to_string());
    }
    Ok(w)
}

fn run_session<A: TreeAutomaton>(args: &Args, tree: LabeledTree, a: A, z: VarSet, params: Vec<LabelId>) -> Result<(), String> {
    let opts = EngineOptions { balance: !args.no_balance, ..Default::default() };
    let script = match &args.script {
        Some(p) => read(p)?,
        None => "enumerate\n".to_string(),
    };
    let weights = match &args.weights {
        Some(p) => parse_weights(&read(p)?)?,
        None => HashMap::new(),
    };
    for id in weights.keys() {
        if tree.node_by_ext_id(*id).is_none() {
            return Err(format!("weights mention unknown node {id}"));
        }
    }
    let start = Instant::now();
    let engine = Engine::preprocess_with(&tree, &a, &z, opts).map_err(err)?;
    let mut s = Session {
        a,
        z,
        opts,
        engine,
        aggregates: BTreeMap::new(),
        weights,
        default_semiring: args.semiring.clone(),
        current: vec![None; params.len()],
        params,
        oracle: args.oracle_check,
        rows: Vec::new(),
        out: String::new(),
    };
    for (i, line) in script.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let res = s.run_command(line);
        s.flush();
        let row = res.map_err(|e| format!("script line {}: {e}", i + 1))?;
        s.rows.push(row);
    }
    if args.bench {
        eprint!("{}", bench_csv(&s.rows));
        eprintln!("# wall time {:.3} ms", start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(())
}

fn run(args: Args) -> Result<(), String> {
    let tree = LabeledTree::parse(&read(&args.tree)?).map_err(err)?;
    let (a, z) = match args.automaton.strip_prefix("catalog:") {
        Some(name) => example_automata(name).map_err(err)?,
        None => parse_automaton(&read(&PathBuf::from(&args.automaton))?).map_err(err)?,
    };
    if args.params == 0 {
        return run_session(&args, tree, a, z, Vec::new());
    }
    let (tree, w, vars, params) = parameterize(&tree, a, &z, args.params).map_err(err)?;
    run_session(&args, tree, w, vars, params)
}

fn main() -> ExitCode {
    let args = Args::parse();
    // Tree documents nest as deep as the tree; parse them on a large stack.
    let worker = std::thread::Builder::new().stack_size(1 << 30).spawn(move || run(args));
    match worker.map_err(err).and_then(|h| h.join().map_err(|_| "worker thread panicked".to_string())) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) | Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
