#![allow(dead_code)]

pub mod cql_fuzz;
pub mod fabricator;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};

use pathwise_core::diagram::{parse_diagram, FlowchartDiagram};
use pathwise_core::pipeline::{run_pipeline, PipelineConfig, PipelineOutcome};
use petgraph::algo::all_simple_paths;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn bbox(rng: &mut StdRng) -> Value {
    json!({"x": rng.gen_range(0.0..0.8), "y": rng.gen_range(0.0..0.8), "w": 0.1, "h": 0.1})
}

pub fn diagram_json(name: &str, nodes: &[Value], edges: &[(String, String)]) -> String {
    let edges: Vec<Value> = edges.iter().map(|(s, t)| json!({"source": s, "target": t})).collect();
    serde_json::to_string_pretty(&json!({
        "pathway_name": name,
        "source_document": format!("generated/{name}.pdf"),
        "pages": 1,
        "nodes": nodes,
        "edges": edges,
    }))
    .unwrap()
}

/// Arbitrary small directed graph with mixed node types, self-loops and
/// parallel-free edges. Roughly half of the graphs get a back edge.
pub fn random_graph(seed: u64, max_nodes: usize) -> FlowchartDiagram {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_nodes);
    let types = ["start_block", "criteria_block", "decision_diamond", "action_block", "end_block", "annotation", "other"];
    let weights = [1usize, 4, 3, 2, 3, 1, 1];
    let mut nodes = Vec::new();
    for i in 0..n {
        let mut pick = rng.gen_range(0..weights.iter().sum::<usize>());
        let mut ty = types[0];
        for (t, w) in types.iter().zip(weights) {
            if pick < w {
                ty = t;
                break;
            }
            pick -= w;
        }
        nodes.push(json!({"id": format!("v{i:02}"), "node_type": ty, "bbox": bbox(&mut rng), "text": format!("step {i}")}));
    }
    let density = rng.gen_range(0.08..0.3);
    let mut edges = Vec::new();
    for s in 0..n {
        for t in 0..n {
            let forward = t > s;
            let p = if forward { density } else { density / 3.0 };
            if rng.gen_bool(p) {
                edges.push((format!("v{s:02}"), format!("v{t:02}")));
            }
        }
    }
    parse_diagram(&diagram_json(&format!("random {seed}"), &nodes, &edges)).expect("generated diagram is valid")
}

/// Exhaustive reference enumeration built from petgraph's simple-path
/// search. Returns rendered journeys (`"<id> (LOOP)"` on re-entry) sorted.
pub fn oracle_journeys(d: &FlowchartDiagram) -> Vec<Vec<String>> {
    let mut g: DiGraph<usize, ()> = DiGraph::new();
    let idx: Vec<NodeIndex> = (0..d.nodes.len()).map(|i| g.add_node(i)).collect();
    let pos = |id: &str| d.nodes.iter().position(|n| n.id == id).unwrap();
    let mut seen = HashSet::new();
    let mut in_deg = vec![0usize; d.nodes.len()];
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); d.nodes.len()];
    for e in &d.edges {
        let (s, t) = (pos(&e.source), pos(&e.target));
        in_deg[t] += 1;
        succ[s].insert(t);
        if seen.insert((s, t)) {
            g.add_edge(idx[s], idx[t], ());
        }
    }
    let ty = |i: usize| d.nodes[i].node_type.as_str();
    let mut entries: Vec<usize> = (0..d.nodes.len()).filter(|&i| ty(i) == "start_block").collect();
    if entries.is_empty() {
        entries = (0..d.nodes.len()).filter(|&i| ty(i) != "annotation" && in_deg[i] == 0).collect();
    }
    let explicit_end = (0..d.nodes.len()).any(|i| ty(i) == "end_block");
    let is_end = |i: usize| {
        if explicit_end {
            ty(i) == "end_block"
        } else {
            ty(i) != "annotation" && succ[i].is_empty()
        }
    };

    // every simple path from an entry whose steps after the first are not ends
    let mut prefixes: Vec<Vec<usize>> = Vec::new();
    for &s in &entries {
        prefixes.push(vec![s]);
        for t in 0..d.nodes.len() {
            if t == s || is_end(t) {
                continue;
            }
            for p in all_simple_paths::<Vec<NodeIndex>, _, std::hash::RandomState>(&g, idx[s], idx[t], 0, None) {
                let p: Vec<usize> = p.iter().map(|n| g[*n]).collect();
                if p[1..].iter().all(|&v| !is_end(v)) {
                    prefixes.push(p);
                }
            }
        }
    }
    let mut out = Vec::new();
    for p in prefixes {
        let last = *p.last().unwrap();
        for &w in &succ[last] {
            let ids = |v: &[usize]| v.iter().map(|&i| d.nodes[i].id.clone()).collect::<Vec<_>>();
            if p.contains(&w) {
                let mut r = ids(&p);
                r.push(format!("{} (LOOP)", d.nodes[w].id));
                out.push(r);
            } else if is_end(w) {
                let mut r = ids(&p);
                r.push(d.nodes[w].id.clone());
                out.push(r);
            }
        }
    }
    out.sort();
    out
}

/// Tarjan-based cycle test: a non-trivial SCC or a self-loop.
pub fn scc_has_cycle(d: &FlowchartDiagram) -> bool {
    let mut g: DiGraph<(), ()> = DiGraph::new();
    let idx: Vec<NodeIndex> = (0..d.nodes.len()).map(|_| g.add_node(())).collect();
    let pos = |id: &str| d.nodes.iter().position(|n| n.id == id).unwrap();
    for e in &d.edges {
        let (s, t) = (pos(&e.source), pos(&e.target));
        if s == t {
            return true;
        }
        g.add_edge(idx[s], idx[t], ());
    }
    petgraph::algo::tarjan_scc(&g).iter().any(|c| c.len() > 1)
}

const CRITERIA_TEXT: &[&str] = &[
    "Rectal bleeding and aged 50 or over",
    "FIT >= 10 ug/g",
    "Haemoptysis",
    "Platelet count > 400 10*9/L",
    "Weight loss and no chest x-ray",
    "Dysphagia or haemoglobin < 110 g/L",
    "Aged 40 or over",
    "Breast lump",
    "Abdominal mass and aged 60 or over",
    "Melanoma",
    "Iron deficiency anaemia",
    "Change in bowel habit",
    "Consider further investigation",
    "Clinical concern about symptoms",
    "Raised platelets",
    "Calculate cumulative risk score",
    "Unexplained symptoms",
    "Haemoglobin < 100",
];
const ACTION_TEXT: &[&str] = &["Request FIT", "Arrange chest x-ray", "Take bloods", "Discuss with patient"];
const END_TEXT: &[&str] = &[
    "REFER URGENTLY ON SUSPECTED CANCER PATHWAY",
    "Refer routinely to outpatient clinic",
    "Safety-net and review in 6 weeks",
    "Refer for endoscopy",
    "Reassure and discharge",
];

/// Pathway-like random diagram with `n` nodes: one start block, realistic
/// node text, mostly forward edges and occasional back edges.
pub fn fuzz_diagram(seed: u64, n: usize) -> FlowchartDiagram {
    assert!(n >= 3);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut kinds = vec!["start_block"];
    for i in 1..n {
        let last = i == n - 1;
        let r: f64 = rng.gen();
        kinds.push(if last || r < 0.15 {
            "end_block"
        } else if r < 0.30 {
            "annotation"
        } else if r < 0.55 {
            "decision_diamond"
        } else if r < 0.80 {
            "criteria_block"
        } else if r < 0.90 {
            "action_block"
        } else if r < 0.95 {
            "process_block"
        } else {
            "other"
        });
    }
    let mut nodes = Vec::new();
    for (i, kind) in kinds.iter().enumerate() {
        let text = match *kind {
            "start_block" => "Patient presents".to_string(),
            "end_block" => END_TEXT.choose(&mut rng).unwrap().to_string(),
            "annotation" => "Local guidance applies".to_string(),
            "action_block" | "process_block" => ACTION_TEXT.choose(&mut rng).unwrap().to_string(),
            _ => CRITERIA_TEXT.choose(&mut rng).unwrap().to_string(),
        };
        let mut node = json!({"id": format!("N{i}"), "node_type": kind, "bbox": bbox(&mut rng), "text": text});
        if *kind == "end_block" && rng.gen_bool(0.3) {
            node["visual"] = json!({"background_color": "red", "font_weight": "bold", "text_case": "upper"});
        }
        nodes.push(node);
    }
    let ends: Vec<usize> = (0..n).filter(|&i| kinds[i] == "end_block").collect();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..n {
        match kinds[i] {
            "end_block" => continue,
            "annotation" => {
                if rng.gen_bool(0.3) {
                    edges.insert((i, rng.gen_range(0..n)));
                }
                continue;
            }
            _ => {}
        }
        let degree = if kinds[i] == "decision_diamond" { 2 } else { rng.gen_range(1..=2) };
        for _ in 0..degree {
            let t = if i + 1 >= n || (i > 0 && rng.gen_bool(0.18)) {
                *ends.choose(&mut rng).unwrap()
            } else if i > 0 && rng.gen_bool(0.1) {
                (0..i).filter(|&j| kinds[j] != "annotation").collect::<Vec<_>>().choose(&mut rng).copied().unwrap_or(0)
            } else {
                let window: Vec<usize> = (i + 1..n).filter(|&j| kinds[j] != "annotation").take(3).collect();
                *window.choose(&mut rng).unwrap_or_else(|| ends.choose(&mut rng).unwrap())
            };
            edges.insert((i, t));
        }
    }
    let edges: Vec<(String, String)> = edges.into_iter().map(|(s, t)| (format!("N{s}"), format!("N{t}"))).collect();
    parse_diagram(&diagram_json(&format!("Fuzz Pathway {seed}"), &nodes, &edges)).expect("fuzz diagram is valid")
}

/// `count` fuzz diagrams spanning 3..=45 nodes whose journey count stays
/// within `max_journeys`. Deterministic.
pub fn fuzz_corpus(count: usize, max_journeys: usize) -> Vec<FlowchartDiagram> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < count {
        let n = 3 + (out.len() * 42) / count.max(2).saturating_sub(1).max(1);
        let n = n.min(45);
        seed += 1;
        let d = fuzz_diagram(seed, n);
        let ok = pathwise_core::graph_audit::enumerate_journeys_with(
            &d,
            pathwise_core::graph_audit::EnumerationOptions { journey_cap: Some(max_journeys) },
        )
        .is_ok_and(|j| !j.is_empty());
        if ok {
            out.push(d);
        }
    }
    out
}

/// File name to sha256 hex for every file in `dir`.
pub fn hash_dir(dir: &Path) -> BTreeMap<String, String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let digest = Sha256::digest(std::fs::read(e.path()).unwrap());
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            (e.file_name().to_string_lossy().to_string(), hex)
        })
        .collect()
}

pub fn write_temp(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

/// Runs the pipeline on an in-memory diagram with the fixture dictionary.
pub fn run_on(diagram: &FlowchartDiagram, out: &Path) -> PipelineOutcome {
    let input = out.join("input");
    std::fs::create_dir_all(&input).unwrap();
    let path = write_temp(&input, "diagram.json", &diagram.to_json());
    let config = PipelineConfig::new(path, fixture("terminology.csv"), out.join("artifacts"));
    run_pipeline(&config).expect("valid config")
}

pub fn artifact(outcome: &PipelineOutcome, suffix: &str) -> PathBuf {
    outcome
        .artifacts
        .iter()
        .find(|p| p.to_string_lossy().ends_with(suffix))
        .unwrap_or_else(|| panic!("no {suffix} artifact"))
        .clone()
}

/// Minimal HTTP/1.1 client: returns status and raw body bytes.
pub fn http(addr: SocketAddr, method: &str, path: &str, body: Option<&[u8]>) -> (u16, Vec<u8>) {
    let mut stream = TcpStream::connect(addr).unwrap();
    let body = body.unwrap_or_default();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n",
        body.len()
    )
    .unwrap();
    stream.write_all(body).unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).unwrap();
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n").expect("header terminator");
    let head = String::from_utf8_lossy(&raw[..split]).to_string();
    let status: u16 = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let mut body = raw[split + 4..].to_vec();
    if head.to_ascii_lowercase().contains("transfer-encoding: chunked") {
        body = dechunk(&body);
    }
    (status, body)
}

fn dechunk(mut data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    loop {
        let line_end = data.windows(2).position(|w| w == b"\r\n").unwrap();
        let size = usize::from_str_radix(std::str::from_utf8(&data[..line_end]).unwrap().trim(), 16).unwrap();
        data = &data[line_end + 2..];
        if size == 0 {
            return out;
        }
        out.extend_from_slice(&data[..size]);
        data = &data[size + 2..];
    }
}

/// Wraps a bundle in a `patient-view` request.
pub fn hook_request(patient_id: &str, bundle: &Value, as_of: Option<&str>) -> Vec<u8> {
    let mut context = json!({"patientId": patient_id, "userId": "Practitioner/example"});
    if let Some(d) = as_of {
        context["asOf"] = json!(d);
    }
    serde_json::to_vec(&json!({
        "hook": "patient-view",
        "hookInstance": "d1577c69-dfbe-44ad-ba6d-3e05e953b2ea",
        "context": context,
        "prefetch": {"patientBundle": bundle},
    }))
    .unwrap()
}

pub struct Compiled {
    pub defs: pathwise_core::cql::Library,
    pub defs_source: String,
    pub routing: pathwise_core::cql::Library,
    pub routing_source: String,
    pub journeys: Vec<pathwise_core::graph_audit::Journey>,
    pub audit: pathwise_core::semantic_audit::CqlAuditReport,
    pub iterations_used: u32,
}

pub fn dictionary() -> pathwise_core::terminology::TerminologyDictionary {
    pathwise_core::terminology::TerminologyDictionary::load(fixture("terminology.csv")).unwrap()
}

/// In-process equivalent of the generation phases with the given generator.
pub fn compile_with(
    d: &FlowchartDiagram,
    dict: &pathwise_core::terminology::TerminologyDictionary,
    generator: &dyn pathwise_core::codegen::DefinitionsGenerator,
) -> Result<Compiled, pathwise_core::codegen::CodegenError> {
    use pathwise_core::codegen::{critic_loop, generate_routing, GenerationContext};
    use pathwise_core::cql::{extract_bindings, parse_library, print_library};
    let audit = pathwise_core::semantic_audit::audit_all(d, &pathwise_core::semantic_audit::AuditLexicon::default());
    let journeys = pathwise_core::graph_audit::enumerate_journeys(d).expect("enumerable");
    let ctx = GenerationContext::new(d, &audit, dict);
    let outcome = critic_loop(&ctx, generator)?;
    let bindings = extract_bindings(&outcome.library)?;
    let routing = generate_routing(&journeys, &bindings, d)?;
    let routing_source = print_library(&routing);
    Ok(Compiled {
        routing: parse_library(&routing_source).expect("routing reparses"),
        routing_source,
        defs: outcome.library,
        defs_source: outcome.source,
        journeys,
        audit,
        iterations_used: outcome.iterations_used,
    })
}

pub fn compile(d: &FlowchartDiagram, dict: &pathwise_core::terminology::TerminologyDictionary) -> Compiled {
    compile_with(d, dict, &pathwise_core::codegen::BaselineGenerator).expect("baseline compiles")
}

/// Random FHIR bundle over the dictionary's codes plus a few foreign and
/// placeholder codings, with random ages, values and units.
pub fn random_bundle(rng: &mut StdRng, dict: &pathwise_core::terminology::TerminologyDictionary, id: usize) -> Value {
    let mut codes: Vec<(String, String)> = dict.entries().map(|e| (e.system_uri.clone(), e.code.clone())).collect();
    codes.push(("http://snomed.info/sct".into(), "89164003".into()));
    codes.push(("urn:pathwise:requires-human-mapping".into(), "UNMAPPED".into()));
    codes.push(("http://example.org/local".into(), "X1".into()));
    let mut patient = json!({"resourceType": "Patient", "id": format!("p{id}")});
    if rng.gen_bool(0.9) {
        let year = rng.gen_range(1925..2010);
        patient["birthDate"] = json!(format!("{year}-{:02}-{:02}", rng.gen_range(1..=12), rng.gen_range(1..=28)));
    }
    let mut entries = vec![json!({"resource": patient})];
    for _ in 0..rng.gen_range(0..6) {
        let (system, code) = codes.choose(rng).unwrap().clone();
        let coding = json!({"coding": [{"system": system, "code": code}]});
        let resource = match rng.gen_range(0..4) {
            0 | 1 => json!({"resourceType": "Condition", "code": coding, "onsetDateTime": "2024-06-01"}),
            2 => {
                let unit = ["ug/g", "g/L", "10*9/L", "mg/L"].choose(rng).unwrap();
                json!({"resourceType": "Observation", "code": coding,
                       "valueQuantity": {"value": rng.gen_range(0..600), "unit": unit}})
            }
            _ => json!({"resourceType": "Procedure", "code": coding, "performedDateTime": "2024-09-01"}),
        };
        entries.push(json!({"resource": resource}));
    }
    json!({"resourceType": "Bundle", "type": "collection", "entry": entries})
}

/// Runs the pipeline for each fixture diagram into `root/<stem>` and returns
/// the artifact directories.
pub fn build_artifacts(root: &Path, fixtures: &[&str]) -> Vec<PathBuf> {
    fixtures
        .iter()
        .map(|rel| {
            let stem = Path::new(rel).file_stem().unwrap().to_string_lossy().to_string();
            let out = root.join(stem);
            let config = PipelineConfig::new(fixture(rel), fixture("terminology.csv"), &out);
            let outcome = run_pipeline(&config).unwrap();
            assert_eq!(outcome.exit_code(), 0, "{rel}: {:?}", outcome.failure);
            out
        })
        .collect()
}

/// Serves `registry` on an ephemeral port from a background runtime.
pub fn start_server(registry: pathwise_core::cds::Registry) -> SocketAddr {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .thread_stack_size(16 * 1024 * 1024)
            .enable_all()
            .build()
            .unwrap();
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            pathwise_core::cds::serve_on(listener, std::sync::Arc::new(registry), std::future::pending()).await.unwrap();
        });
    });
    addr
}

pub const EVAL_PATHWAYS: [&str; 3] = ["eval/colorectal.json", "eval/general.json", "eval/lung.json"];
