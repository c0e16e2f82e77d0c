use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use neckscope::app::{exit_code, heatmap, piece_table, run_suite, tree_text, Field, RunOptions, Setup, Suite};
use neckscope::config::parse_config;
use neckscope::emit::{grid_csv, heatmap_svg, pieces_dot, profile_csv, tree_dot};
use neckscope::neck_ode::{neck_profile, PROFILE_DT};
use neckscope::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "neckscope", version, about = "Bubble-tree decompositions and neck decay checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// configuration file (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// directory for written artifacts
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// sequence index; repeat to override the configured list
    #[arg(long = "t", global = true)]
    t: Vec<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// grid resolution for heatmaps and grid distances
    #[arg(long, global = true)]
    resolution: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// print the bubble tree and write tree.dot
    Tree,
    /// print the piece table and write pieces.dot
    Decompose,
    /// run a verification suite
    Verify {
        #[arg(long, default_value = "all", value_parser = ["metrics", "decay", "three-circle", "ode", "all"])]
        suite: String,
    },
    /// write a field sampled on a grid as CSV and SVG
    Heatmap {
        #[arg(long, value_parser = ["omega", "gradnorm", "distance"])]
        field: String,
    },
    /// write the circle-energy profile of a simple neck as CSV
    Profile {
        /// piece label such as `neck-l`, or the bubble id `l`
        #[arg(long)]
        neck: String,
    },
}

fn write(out: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(name), body)?;
    Ok(())
}

fn setup(cli: &Cli) -> Result<(Setup, RunOptions)> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Schema { field: "--config".into(), msg: "a configuration file is required".into() })?;
    let s = Setup::new(parse_config(path)?)?;
    let mut opts = RunOptions::from_config(&s.config);
    if !cli.t.is_empty() {
        opts.t_values = cli.t.clone();
    }
    if let Some(seed) = cli.seed {
        opts.seed = seed;
    }
    if let Some(n) = cli.resolution {
        opts.resolution = n;
    }
    Ok((s, opts))
}

fn first_valid_t(s: &Setup, opts: &RunOptions) -> Result<f64> {
    s.valid_t(&opts.t_values).first().copied().ok_or_else(|| Error::NotValidAtIndex {
        t: opts.t_values.first().copied().unwrap_or(f64::NAN),
        reason: "no requested index gives a valid decomposition".into(),
    })
}

fn run(cli: &Cli) -> Result<u8> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    if let Command::Verify { suite } = &cli.command {
        if suite == "ode" && cli.config.is_none() {
            let s = Setup::new(neckscope::config::parse_str(r#"{"bubbles": []}"#)?)?;
            return verify(&s, &RunOptions::from_config(&s.config), Suite::Ode, cli, &out);
        }
    }
    let (s, opts) = setup(cli)?;
    match &cli.command {
        Command::Tree => {
            print!("{}", tree_text(&s.graph));
            write(&out, "tree.dot", &tree_dot(&s.graph))?;
        }
        Command::Decompose => {
            let t = first_valid_t(&s, &opts)?;
            println!("delta = {}, t = {t}", s.graph.delta());
            print!("{}", piece_table(&s.graph, t));
            write(&out, "pieces.dot", &pieces_dot(&s.graph))?;
        }
        Command::Verify { suite } => return verify(&s, &opts, suite.parse::<Suite>()?, cli, &out),
        Command::Heatmap { field } => {
            let field: Field = field.parse()?;
            let t = first_valid_t(&s, &opts)?;
            let (grid, values) = heatmap(&s, field, t, opts.resolution)?;
            write(&out, &format!("{}.csv", field.as_str()), &grid_csv(&grid.points(), &values))?;
            let shown: Vec<f64> = match field {
                Field::Omega | Field::GradNorm => values.iter().map(|v| v.log10()).collect(),
                Field::Distance => values.clone(),
            };
            let title = format!("{} at t = {t}", field.as_str());
            write(&out, &format!("{}.svg", field.as_str()), &heatmap_svg(grid.n, &shown, &title))?;
        }
        Command::Profile { neck } => {
            let t = first_valid_t(&s, &opts)?;
            let label = if neck.starts_with("neck-") { neck.clone() } else { format!("neck-{neck}") };
            let piece = s
                .graph
                .piece_by_label(&label)
                .ok_or_else(|| Error::Schema { field: "--neck".into(), msg: format!("no piece `{label}`") })?;
            let prof = neck_profile(&s.family, &s.graph, piece.id, t, PROFILE_DT)?;
            write(&out, &format!("profile_{label}.csv"), &profile_csv(&prof))?;
        }
    }
    Ok(0)
}

fn verify(s: &Setup, opts: &RunOptions, suite: Suite, cli: &Cli, out: &Path) -> Result<u8> {
    let report = run_suite(s, suite, opts)?;
    let text = report.render();
    print!("{text}");
    if cli.out.is_some() {
        write(out, &format!("report_{}.txt", suite.as_str()), &text)?;
    }
    Ok(if report.failed() { 1 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("NECKSCOPE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
