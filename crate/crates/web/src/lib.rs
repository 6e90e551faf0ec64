//! Browser demo: graphical-model heatmaps, a world snapshot with one
//! prover's witness tree, and tree verification from JSON.
//!
//! Every export is a thin wrapper over a plain function that returns
//! `Result<String, String>`, so the logic is tested natively.

use std::fmt::Write as _;

use tpop::grid::cell_rng;
use tpop::report::render_heatmap;
use tpop::world::WorldOracle;
use tpop::{
    build_tree, sweep_grid, verify, ConfirmationOracle, GridSpec, Position, StatePriors,
    TPoPParams, TreeBundle, World, WorldConfig,
};
use wasm_bindgen::prelude::*;

/// Bundled example tree: two witnesses per level, the second subtree refuted.
pub const WORKED_EXAMPLE: &str = include_str!("../../cli/scenarios/worked_example.json");

const MAX_MODEL_CELLS: usize = 51 * 51;
const MAX_TREES: u32 = 20_000;

fn preset(theta: &str) -> Result<TPoPParams, String> {
    match theta {
        "flat" => Ok(TPoPParams::flat()),
        "deep" => Ok(TPoPParams::deep()),
        other => Err(format!("unknown parameter preset `{other}`")),
    }
}

pub fn model_heatmap_svg(
    theta: &str,
    metric: &str,
    step: f64,
    trees: u32,
    seed: u32,
) -> Result<String, String> {
    let params = preset(theta)?;
    let grid = GridSpec::from_step(step).map_err(|e| e.to_string())?;
    if grid.cell_count() > MAX_MODEL_CELLS || trees == 0 || trees > MAX_TREES {
        return Err(format!(
            "grid or tree count too large for the browser (trees 1..={MAX_TREES})"
        ));
    }
    let (r, s) =
        sweep_grid(&params, grid, u64::from(trees), u64::from(seed)).map_err(|e| e.to_string())?;
    let map = match metric {
        "reliability" | "R" => r,
        "security" | "S" => s,
        other => return Err(format!("unknown metric `{other}`")),
    };
    let title = format!("{}_m, {theta}, {trees} trees per cell", map.kind.letter());
    Ok(render_heatmap(&map, &title))
}

const VIEW: f64 = 520.0;

/// Spawns a calibrated world and draws it with the witness tree of the first
/// agent whose honesty matches `honest_prover`.
pub fn world_snapshot_svg(
    p_h: f64,
    p_c: f64,
    n_agents: u32,
    theta: &str,
    honest_prover: bool,
    seed: u32,
) -> Result<String, String> {
    let params = preset(theta)?;
    let priors = StatePriors::new(p_h, p_c).map_err(|e| e.to_string())?;
    let n_agents = (n_agents as usize).clamp(100, 3000);
    let config = WorldConfig::calibrated(n_agents, 1.0, 50.0, 0.1, priors, u64::from(seed));
    let world = World::spawn(config).map_err(|e| e.to_string())?;
    let prover = world
        .agents()
        .iter()
        .find(|a| a.honest == honest_prover)
        .ok_or_else(|| {
            format!(
                "no {} agent in this world",
                if honest_prover { "honest" } else { "dishonest" }
            )
        })?
        .id;
    let mut rng = cell_rng(u64::from(seed), 1);
    let mut oracle = WorldOracle {
        world: &world,
        rng: &mut rng,
    };
    let tree = build_tree(prover, &params, &mut oracle).map_err(|e| e.to_string())?;
    let outcome = verify(&tree, &params, &oracle).map_err(|e| e.to_string())?;

    let c = world.config();
    let scale = VIEW / c.width.max(c.height);
    let pt = |p: Position| (p.x * scale, VIEW - p.y * scale);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{VIEW}" height="{h}" viewBox="0 0 {VIEW} {h}" font-family="sans-serif" font-size="13">"#,
        h = VIEW + 30.0
    );
    let _ = writeln!(
        svg,
        r##"<rect width="{VIEW}" height="{VIEW}" fill="#fafafa" stroke="#999"/>"##
    );
    for a in world.agents() {
        let (x, y) = pt(a.true_pos);
        let fill = match (a.honest, a.coerced) {
            (true, false) => "#3b528b",
            (true, true) => "#21918c",
            (false, true) => "#e08214",
            (false, false) => "#b2182b",
        };
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.1}" cy="{y:.1}" r="2" fill="{fill}" opacity="0.55"/>"#
        );
    }
    let (px, py) = pt(world.agent(prover).expect("prover exists").claimed_pos);
    let _ = writeln!(
        svg,
        r##"<circle cx="{px:.1}" cy="{py:.1}" r="{:.1}" fill="none" stroke="#444" stroke-dasharray="4 3"/>"##,
        c.range_of_sight * scale
    );
    for (level, nodes) in tree.levels().iter().enumerate().skip(1) {
        for node in nodes {
            let parent = tree.parent_agent(level, node).expect("non-root node");
            let from = pt(world.agent(parent).expect("known").claimed_pos);
            let to = pt(world.agent(node.agent).expect("known").claimed_pos);
            let (stroke, dash) = if oracle.confirms(node.agent, parent) {
                ("#1a9850", "")
            } else {
                ("#d73027", r#" stroke-dasharray="5 4""#)
            };
            let _ = writeln!(
                svg,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{stroke}" stroke-width="2"{dash}/><circle cx="{:.1}" cy="{:.1}" r="4" fill="{stroke}"/>"#,
                from.0, from.1, to.0, to.1, to.0, to.1
            );
        }
    }
    let _ = writeln!(
        svg,
        r##"<circle cx="{px:.1}" cy="{py:.1}" r="6" fill="#000"/>"##
    );
    let prover_state = world.agent(prover).expect("prover exists");
    let _ = writeln!(
        svg,
        r#"<text x="4" y="{:.0}">prover {prover} ({}, {}): {}</text>"#,
        VIEW + 20.0,
        if prover_state.honest {
            "honest"
        } else {
            "dishonest"
        },
        if prover_state.coerced {
            "coerced"
        } else {
            "non-coerced"
        },
        if outcome.verdict {
            "accepted"
        } else {
            "rejected"
        }
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Verifies a tree bundle; `threshold` overrides the bundled one. Returns
/// the verification outcome as JSON.
pub fn verify_tree_json(text: &str, threshold: Option<f64>) -> Result<String, String> {
    let bundle = TreeBundle::from_json(text).map_err(|e| e.to_string())?;
    let base = bundle
        .theta
        .clone()
        .ok_or("the bundle has no `theta` parameters")?;
    let params = TPoPParams::new(
        threshold.unwrap_or(base.threshold().value()),
        base.witnesses().to_vec(),
    )
    .map_err(|e| e.to_string())?
    .with_duplicate_policy(base.duplicate_policy());
    let outcome = verify(&bundle.tree, &params, &bundle.table()).map_err(|e| e.to_string())?;
    serde_json::to_string_pretty(&outcome).map_err(|e| e.to_string())
}

fn js(result: Result<String, String>) -> Result<String, JsError> {
    result.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = modelHeatmap)]
pub fn model_heatmap(
    theta: &str,
    metric: &str,
    step: f64,
    trees: u32,
    seed: u32,
) -> Result<String, JsError> {
    js(model_heatmap_svg(theta, metric, step, trees, seed))
}

#[wasm_bindgen(js_name = worldSnapshot)]
pub fn world_snapshot(
    p_h: f64,
    p_c: f64,
    n_agents: u32,
    theta: &str,
    honest_prover: bool,
    seed: u32,
) -> Result<String, JsError> {
    js(world_snapshot_svg(
        p_h,
        p_c,
        n_agents,
        theta,
        honest_prover,
        seed,
    ))
}

#[wasm_bindgen(js_name = verifyTree)]
pub fn verify_tree(text: &str, threshold: Option<f64>) -> Result<String, JsError> {
    js(verify_tree_json(text, threshold))
}

#[wasm_bindgen(js_name = workedExample)]
pub fn worked_example() -> String {
    WORKED_EXAMPLE.to_string()
}
