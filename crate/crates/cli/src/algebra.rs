//! `lsa algebra` subcommands: derived series, word evaluation, and the
//! formula-to-branching-program compiler. Each prints a human-readable
//! summary followed by a JSON document.

use clap::{Args, Subcommand};
use serde_json::json;

use lsa_core::barrington::{compile, decide, default_sigma, parse_formula};
use lsa_core::groups::{
    derived_series, parse_word, preset, preset_names, word_evaluate, GroupElement, GroupSpec,
};

use crate::CliError;

#[derive(Subcommand)]
pub enum AlgebraCommand {
    /// Compute the derived series and solvability class of a group.
    DerivedSeries(GroupArgs),
    /// Evaluate a word over a group's generators and test for identity.
    WordEval(WordArgs),
    /// Compile a Boolean formula to a width-5 branching program and verify
    /// it against the truth table.
    Barrington(BarringtonArgs),
}

#[derive(Args)]
pub struct GroupArgs {
    /// Preset name (Z5, S4, A5, icosahedral); omit when using --gen.
    group: Option<String>,
    /// Generator in cycle notation, e.g. "(0 1 2)(3 4)"; repeatable.
    #[arg(long = "gen")]
    generators: Vec<String>,
    /// Force the permutation degree (number of points).
    #[arg(long)]
    degree: Option<usize>,
}

#[derive(Args)]
pub struct WordArgs {
    /// Preset name (Z5, S4, A5, icosahedral), or any label when --gen is
    /// given.
    group: String,
    /// The word, e.g. "g0 g1^-1 g0".
    word: String,
    /// Generator in cycle notation; repeatable and overrides the preset.
    #[arg(long = "gen")]
    generators: Vec<String>,
    /// Force the permutation degree (number of points).
    #[arg(long)]
    degree: Option<usize>,
}

#[derive(Args)]
pub struct BarringtonArgs {
    /// Formula over the grammar `f := xN | !f | (f & f) | (f | f)`.
    formula: String,
    /// Skip the exhaustive truth-table verification (required above 12
    /// variables).
    #[arg(long)]
    no_verify: bool,
}

pub fn run(cmd: AlgebraCommand) -> Result<(), CliError> {
    match cmd {
        AlgebraCommand::DerivedSeries(args) => derived_series_cmd(args),
        AlgebraCommand::WordEval(args) => word_eval_cmd(args),
        AlgebraCommand::Barrington(args) => barrington_cmd(args),
    }
}

fn resolve_group(
    name: Option<&str>,
    generators: &[String],
    degree: Option<usize>,
) -> Result<(String, GroupSpec), CliError> {
    if !generators.is_empty() {
        let refs: Vec<&str> = generators.iter().map(String::as_str).collect();
        let spec = GroupSpec::from_cycle_strings(&refs, degree)
            .map_err(|e| CliError::usage(e.to_string()))?;
        return Ok((name.unwrap_or("custom").to_string(), spec));
    }
    let name = name.ok_or_else(|| {
        CliError::usage("give a preset name or at least one --gen \"(cycle notation)\"")
    })?;
    let spec = preset(name).ok_or_else(|| {
        CliError::usage(format!(
            "unknown group preset {name:?}; available: {}",
            preset_names().join(", ")
        ))
    })?;
    Ok((name.to_string(), spec))
}

fn derived_series_cmd(args: GroupArgs) -> Result<(), CliError> {
    let (name, spec) = resolve_group(args.group.as_deref(), &args.generators, args.degree)?;
    let class = derived_series(&spec).map_err(|e| CliError::invariant(e.to_string()))?;
    let orders: Vec<String> = class.series_orders.iter().map(usize::to_string).collect();
    println!("group: {name}");
    println!("derived series orders: {}", orders.join(" > "));
    println!("classification: {:?}", class.level);
    let doc = json!({
        "group": name,
        "series_orders": class.series_orders,
        "class": format!("{:?}", class.level),
    });
    println!("{doc}");
    Ok(())
}

fn word_eval_cmd(args: WordArgs) -> Result<(), CliError> {
    let (name, spec) = resolve_group(Some(args.group.as_str()), &args.generators, args.degree)?;
    let word = parse_word(&args.word).map_err(|e| CliError::usage(e.to_string()))?;
    let result = word_evaluate(&spec, &word).map_err(|e| CliError::usage(e.to_string()))?;
    let is_identity = result.is_identity();
    let rendered = match &result {
        GroupElement::Perm(p) => p.cycle_notation(),
        GroupElement::Matrix(m) => format!("{m:?}"),
    };
    println!("group: {name}");
    println!("word: {}", args.word);
    println!("product: {rendered}");
    println!("identity: {is_identity}");
    let doc = json!({
        "group": name,
        "word": args.word,
        "product": rendered,
        "identity": is_identity,
    });
    println!("{doc}");
    Ok(())
}

fn barrington_cmd(args: BarringtonArgs) -> Result<(), CliError> {
    let formula = parse_formula(&args.formula).map_err(|e| CliError::usage(e.to_string()))?;
    let sigma = default_sigma();
    let program = compile(&formula, &sigma).map_err(|e| CliError::invariant(e.to_string()))?;
    let num_vars = formula.num_vars().max(1);
    println!("formula: {}", args.formula);
    println!("depth: {}", formula.depth());
    println!("length: {} (= 4^depth)", program.len());
    println!("accept cycle: {}", sigma.cycle_notation());

    let mut truth_table = Vec::new();
    let mut verified = None;
    if !args.no_verify {
        if num_vars > 12 {
            return Err(CliError::usage(format!(
                "{num_vars} variables is too many for exhaustive verification; pass --no-verify"
            )));
        }
        let mut all_match = true;
        for mask in 0..(1usize << num_vars) {
            let assignment: Vec<bool> = (0..num_vars).map(|i| (mask >> i) & 1 == 1).collect();
            let decided = decide(&program, &assignment)
                .map_err(|e| CliError::invariant(e.to_string()))?;
            let direct = formula.eval(&assignment);
            all_match &= decided == direct;
            let bits: String = assignment.iter().map(|&b| if b { '1' } else { '0' }).collect();
            truth_table.push(json!({
                "assignment": bits,
                "decided": decided,
                "direct": direct,
            }));
        }
        verified = Some(all_match);
        println!(
            "truth table: {} assignments, program {} the formula",
            1usize << num_vars,
            if all_match { "matches" } else { "DISAGREES WITH" }
        );
        if !all_match {
            return Err(CliError::invariant("program disagrees with the truth table"));
        }
    }

    let instructions: Vec<_> = program
        .instructions
        .iter()
        .map(|i| {
            json!({
                "var": i.var,
                "if_false": i.if_false.cycle_notation(),
                "if_true": i.if_true.cycle_notation(),
            })
        })
        .collect();
    let doc = json!({
        "formula": args.formula,
        "depth": formula.depth(),
        "length": program.len(),
        "accept_cycle": sigma.cycle_notation(),
        "verified": verified,
        "truth_table": truth_table,
        "instructions": instructions,
    });
    println!("{doc}");
    Ok(())
}
