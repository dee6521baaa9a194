use graphsynth_core::composition::{rule_filter_stage1, CompositionTask};
use graphsynth_core::context::{ContextBundle, ContextKind};
use graphsynth_core::frontend::scan_repository;
use graphsynth_core::gateway::TaskFormat;
use graphsynth_core::graph::{CodeGraph, EntityId, Language};
use graphsynth_core::verdict::Reason;

use crate::common::{frontend, repo_for};
use crate::Outcome;

const CPP_CASES: [(&str, &str, Reason); 10] = [
    ("valid free call", "geo::Vec2 r = geo::add(geo::Vec2{1, 2}, geo::Vec2{3, 4});", Reason::Ok),
    (
        "valid member call",
        "geo::Circle c(geo::Vec2{0, 0}, 1.0);\nbool in = c.contains(geo::Vec2{0.5, 0.5});",
        Reason::Ok,
    ),
    ("valid through using-directive", "using namespace geo;\ndouble d = dot(Vec2{1, 0}, Vec2{0, 1});", Reason::Ok),
    ("too few arguments", "geo::Vec2 v = geo::scale(geo::Vec2{1, 2});", Reason::ArityMismatch),
    ("argument to nullary method", "geo::Vec2 v{3, 4};\ndouble n = v.norm(2);", Reason::ArityMismatch),
    ("namespace omitted", "double m = mean({1.0, 2.0});", Reason::PrefixMismatch),
    ("wrong namespace", "geo::Vec2 c = shapes::centroid({});", Reason::PrefixMismatch),
    ("nonexistent function", "geo::Vec2 v = geo::cross(geo::Vec2{1, 0}, geo::Vec2{0, 1});", Reason::UnknownEntity),
    ("standard library call", "double r = std::sqrt(geo::dot(geo::Vec2{1, 1}, geo::Vec2{1, 1}));", Reason::Ok),
    ("method called as free function", "geo::Circle c(geo::Vec2{0, 0}, 2.0);\ndouble a = area();", Reason::PrefixMismatch),
];

const PYTHON_CASES: [(&str, &str, Reason); 10] = [
    (
        "valid call and method",
        "from inventory.models import make_item\nitem = make_item(\"pen\", 2.0)\nprint(item.total())",
        Reason::Ok,
    ),
    ("valid call with default", "from inventory.pricing import discount\nprice = discount(10.0, 20)", Reason::Ok),
    ("valid module qualifier", "from inventory import pricing\ngross = pricing.with_tax(5.0)", Reason::Ok),
    ("too few arguments", "from inventory.util import clamp\nx = clamp(5, 0)", Reason::ArityMismatch),
    ("method missing argument", "from inventory.store import Store\ns = Store()\ns.add()", Reason::ArityMismatch),
    ("no arguments", "from inventory.pricing import discount\np = discount()", Reason::ArityMismatch),
    (
        "function called as method",
        "from inventory.store import Store\ns = Store()\nv = s.with_tax(3.0)",
        Reason::PrefixMismatch,
    ),
    ("method called as function", "from inventory.models import Item\nt = total()", Reason::PrefixMismatch),
    ("nonexistent method", "from inventory.store import Store\ns = Store()\ns.restock(3)", Reason::UnknownEntity),
    ("builtins only", "items = sorted([3, 1, 2])\nprint(len(items), max(items))", Reason::Ok),
];

fn task(graph: &CodeGraph, reference: &str) -> CompositionTask {
    CompositionTask {
        id: "crafted".into(),
        source_test: EntityId::from_raw("crafted"),
        format: TaskFormat::Programming,
        difficulty: 1,
        statement: "crafted".into(),
        reference_answer: format!("```\n{reference}\n```"),
        grading_criteria: Vec::new(),
        context: ContextBundle::new(ContextKind::DependencyClosureCode),
        apis: Vec::new(),
        context_entities: graph.entities().map(|e| e.id.clone()).collect(),
        prompt_hash: String::new(),
    }
}

pub fn run() -> Outcome {
    let mut wrong = Vec::new();
    let mut total = 0;
    for (language, cases) in [(Language::Cpp, &CPP_CASES), (Language::Python, &PYTHON_CASES)] {
        let graph = match scan_repository(&repo_for(language), &frontend(language)) {
            Ok(a) => a.graph,
            Err(e) => return Outcome::Fail(e.to_string()),
        };
        for (name, code, want) in cases.iter() {
            total += 1;
            let v = rule_filter_stage1(&task(&graph, code), &graph);
            if v.reason != *want || v.pass != (*want == Reason::Ok) {
                wrong.push(format!("{language} `{name}`: got {} ({}), want {want}", v.reason, v.detail));
            }
        }
    }
    let correct = total - wrong.len();
    if wrong.is_empty() {
        Outcome::Pass(format!("{correct}/{total} classified correctly"))
    } else {
        Outcome::Fail(format!("{correct}/{total} correct: {}", wrong.join(" | ")))
    }
}
