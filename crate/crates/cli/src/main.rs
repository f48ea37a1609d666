use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use finspace::cohomology::{sheaf_cohomology, window_cohomology, DEFAULT_WINDOW};
use finspace::constructions::{fibered_product, stein_factorization, CoveringModel};
use finspace::poset::PointSet;
use finspace::predicates::{
    is_affine, is_affine_morphism, is_finite_space, is_schematic, is_schematic_morphism, is_semi_separated,
    AffineMode, MorphismMode, PredicateVerdict,
};
use finspace::sheaf::SheafDescriptor;
use finspace::space::{MorphismDescriptor, MorphismDoc, RingedFiniteSpace};
use finspace::spec_functor::{refinement_equivalence, spec_export};
use finspace::Error;

#[derive(Parser)]
#[command(name = "finspace", version, about = "Ringed finite spaces: cohomology, predicates, Spec")]
struct Cli {
    #[arg(long, value_enum, global = true, default_value_t = Format::Pretty)]
    format: Format,
    /// Check every relation p < p' instead of Hasse edges only.
    #[arg(long, global = true)]
    paranoid: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Pretty,
}

#[derive(Clone, Copy, ValueEnum)]
enum Predicate {
    Schematic,
    SemiSeparated,
    Affine,
    Finite,
}

#[derive(Clone, Copy, ValueEnum)]
enum MorphismProperty {
    Schematic,
    LocallyAcyclic,
    Affine,
    WeakEquivalence,
}

#[derive(Clone, Copy, ValueEnum)]
enum CohomologyMode {
    Exact,
    Window,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a space document.
    Validate { space: PathBuf },
    /// Sheaf cohomology on an open subset.
    Cohomology {
        space: PathBuf,
        /// Comma-separated points; the smallest open containing them is used.
        #[arg(long)]
        open: Option<String>,
        /// Sheaf document (default: the structure sheaf).
        #[arg(long)]
        sheaf: Option<PathBuf>,
        /// A degree, or `all`.
        #[arg(long, default_value = "all")]
        degree: String,
        #[arg(long, value_enum, default_value_t = CohomologyMode::Exact)]
        mode: CohomologyMode,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
    },
    /// Decide a predicate on a space.
    Check {
        #[arg(value_enum)]
        predicate: Predicate,
        space: PathBuf,
    },
    /// Decide a property of a morphism.
    MorphismCheck {
        morphism: PathBuf,
        #[arg(long, value_enum)]
        property: MorphismProperty,
    },
    /// Stein factorization of a morphism.
    Stein {
        morphism: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fibered product of two morphisms into the same base.
    Product {
        x: PathBuf,
        y: PathBuf,
        #[arg(long)]
        over: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Finite model of a covering of a space.
    Model {
        space: PathBuf,
        covering: PathBuf,
        /// A thinner covering; emits the refinement morphism and its witness.
        #[arg(long)]
        refinement: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Charts and gluings of Spec.
    SpecExport {
        space: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Beat-point core of the underlying poset.
    Core { space: PathBuf },
}

/// An error tagged with the file it came from.
struct Failure(String);

impl Failure {
    fn at(path: &Path, e: Error) -> Self {
        Failure(format!("{}: {e}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<(String, Value, u8), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load_space(path: &Path) -> Result<RingedFiniteSpace, Failure> {
    RingedFiniteSpace::from_json(&read(path)?).map_err(|e| Failure::at(path, e))
}

fn load_morphism(path: &Path) -> Result<MorphismDescriptor, Failure> {
    let text = read(path)?;
    let doc: MorphismDoc =
        serde_json::from_str(&text).map_err(|e| Failure::at(path, Error::Malformed(e.to_string())))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let load = |name: &str| {
        let p = dir.join(name);
        let text = fs::read_to_string(&p).map_err(|e| Error::Malformed(format!("{}: {e}", p.display())))?;
        RingedFiniteSpace::from_json(&text)
    };
    MorphismDescriptor::from_doc(&doc, &load).map_err(|e| Failure::at(path, e))
}

fn load_covering(x: &RingedFiniteSpace, path: &Path) -> Result<Vec<PointSet>, Failure> {
    let bad = |msg: String| Failure::at(path, Error::Malformed(msg));
    let v: Value = serde_json::from_str(&read(path)?).map_err(|e| bad(e.to_string()))?;
    let opens = v.get("opens").and_then(Value::as_array).ok_or_else(|| bad("missing `opens` list".into()))?;
    let labels = |v: &Value| -> Result<Vec<String>, Failure> {
        v.as_array()
            .ok_or_else(|| bad("expected a list of point ids".into()))?
            .iter()
            .map(|s| s.as_str().map(str::to_string).ok_or_else(|| bad("point ids are strings".into())))
            .collect()
    };
    let poset = x.poset();
    let mut cover = Vec::new();
    for o in opens {
        let set = match o.get("complement") {
            Some(c) => {
                let gone = poset.set_from_labels(&labels(c)?).map_err(|e| Failure::at(path, e))?;
                poset.all().difference(&gone).copied().collect()
            }
            None => poset.set_from_labels(&labels(o)?).map_err(|e| Failure::at(path, e))?,
        };
        cover.push(set);
    }
    Ok(cover)
}

fn write_output(path: &Option<PathBuf>, value: &Value) -> Result<(), Failure> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(value).expect("values serialize") + "\n";
        fs::write(p, text).map_err(|e| Failure(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn verdict_outcome(v: PredicateVerdict) -> Outcome {
    let code = v.verdict.exit_code() as u8;
    Ok((v.render(), serde_json::to_value(&v).expect("verdicts serialize"), code))
}

fn parse_open(x: &RingedFiniteSpace, open: &Option<String>) -> Result<PointSet, Failure> {
    match open {
        None => Ok(x.poset().all()),
        Some(s) => {
            let labels: Vec<&str> = s.split(',').map(str::trim).filter(|l| !l.is_empty()).collect();
            let set = x.poset().set_from_labels(&labels)?;
            Ok(x.poset().open_hull(&set))
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Validate { space } => {
            let x = load_space(space)?;
            let finite = is_finite_space(&x).holds();
            let text = format!(
                "valid: {} points, dimension {}, universe {}\nfinite space: {}\n",
                x.len(),
                x.poset().dim(),
                universe_name(&x),
                if finite { "yes" } else { "no" }
            );
            let value = json!({
                "valid": true,
                "points": x.len(),
                "dimension": x.poset().dim(),
                "finite_space": finite,
                "space": x.to_doc(),
            });
            Ok((text, value, 0))
        }
        Command::Cohomology { space, open, sheaf, degree, mode, window } => {
            let x = load_space(space)?;
            let u = parse_open(&x, open)?;
            let f = match sheaf {
                Some(p) => SheafDescriptor::from_json(&x, &read(p)?).map_err(|e| Failure::at(p, e))?,
                None => SheafDescriptor::Structure,
            };
            let pick: Option<usize> = match degree.as_str() {
                "all" => None,
                d => Some(d.parse().map_err(|_| Failure(format!("bad degree `{d}`")))?),
            };
            match mode {
                CohomologyMode::Exact => {
                    let report = sheaf_cohomology(&x, &u, &f)?;
                    let mut text = format!("open {{{}}}\n", report.open.join(","));
                    let value = match pick {
                        None => {
                            text.push_str(&report.render(x.places()));
                            serde_json::to_value(&report).expect("reports serialize")
                        }
                        Some(i) => {
                            text.push_str(&format!("H^{i} = {}\n", report.render_degree(i, x.places())));
                            if let Some(d) = report.degree(i) {
                                for p in &d.pieces {
                                    text.push_str(&format!("  {}: dim {} x {}\n", p.pattern, p.dim, p.multiplicity));
                                }
                            }
                            let mut one = report.clone();
                            one.degrees = report.degree(i).cloned().into_iter().collect();
                            serde_json::to_value(&one).expect("reports serialize")
                        }
                    };
                    Ok((text, value, 0))
                }
                CohomologyMode::Window => {
                    let w = window_cohomology(&x, &u, &f, *window)?;
                    let text = format!(
                        "window {}: dims {:?}, predicted {:?}, stabilized {}\n",
                        w.window, w.dims, w.predicted, w.stabilized
                    );
                    Ok((text, serde_json::to_value(&w).expect("reports serialize"), 0))
                }
            }
        }
        Command::Check { predicate, space } => {
            let x = load_space(space)?;
            let v = match predicate {
                Predicate::Schematic => is_schematic(&x, cli.paranoid)?,
                Predicate::SemiSeparated => is_semi_separated(&x, cli.paranoid)?,
                Predicate::Affine => is_affine(&x)?,
                Predicate::Finite => is_finite_space(&x),
            };
            verdict_outcome(v)
        }
        Command::MorphismCheck { morphism, property } => {
            let f = load_morphism(morphism)?;
            let v = match property {
                MorphismProperty::Schematic => is_schematic_morphism(&f, MorphismMode::Schematic, cli.paranoid)?,
                MorphismProperty::LocallyAcyclic => {
                    is_schematic_morphism(&f, MorphismMode::LocallyAcyclic, cli.paranoid)?
                }
                MorphismProperty::Affine => is_affine_morphism(&f, AffineMode::Affine, cli.paranoid)?,
                MorphismProperty::WeakEquivalence => {
                    is_affine_morphism(&f, AffineMode::WeakEquivalence, cli.paranoid)?
                }
            };
            verdict_outcome(v)
        }
        Command::Stein { morphism, output } => {
            let f = load_morphism(morphism)?;
            let s = stein_factorization(&f)?;
            let value = json!({
                "middle": s.middle.to_doc(),
                "f_prime": s.f_prime.to_doc(),
                "a": s.a.to_doc(),
            });
            write_output(output, &value)?;
            let mut text = String::from("Y':\n");
            for y in 0..s.middle.len() {
                text.push_str(&format!("  {}: {}\n", s.middle.poset().label(y), s.middle.stalk_name(y)));
            }
            Ok((text, value, 0))
        }
        Command::Product { x, y, over, output } => {
            let f = load_morphism(x)?;
            let g = load_morphism(y)?;
            let s = load_space(over)?;
            if f.target != s || g.target != s {
                return Err(Failure(format!("{}: morphisms must both land in this base", over.display())));
            }
            let z = fibered_product(&f, &g)?;
            let value = json!({
                "space": z.space.to_doc(),
                "p1": z.p1.labelled_map(),
                "p2": z.p2.labelled_map(),
                "schematic": z.schematic,
                "projections_schematic": z.projections_schematic,
            });
            write_output(output, &value)?;
            let mut text = format!("{} points\n", z.space.len());
            for t in 0..z.space.len() {
                text.push_str(&format!("  {}: {}\n", z.space.poset().label(t), z.space.stalk_name(t)));
            }
            text.push_str(&format!(
                "schematic: {}\nprojections schematic: {}\n",
                z.schematic.verdict, z.projections_schematic
            ));
            Ok((text, value, 0))
        }
        Command::Model { space, covering, refinement, output } => {
            let s = load_space(space)?;
            let cover = load_covering(&s, covering)?;
            let m = CoveringModel::new(&s, cover).map_err(|e| Failure::at(covering, e))?;
            let mut text = String::new();
            for t in 0..m.space.len() {
                text.push_str(&format!("  {}: {}\n", m.space.poset().label(t), m.space.stalk_name(t)));
            }
            let mut value = json!({ "space": m.space.to_doc(), "projection": m.projection.labelled_map() });
            if let Some(r) = refinement {
                let finer = CoveringModel::new(&s, load_covering(&s, r)?).map_err(|e| Failure::at(r, e))?;
                let f = finer.refinement_to(&m).map_err(|e| Failure::at(r, e))?;
                let w = refinement_equivalence(&f)?;
                text.push_str(&format!("refinement: weak equivalence from {} points\n", f.source.len()));
                for c in &w.charts {
                    text.push_str(&format!(
                        "  Spec {} over {} = glued {{{}}}\n",
                        c.chart.name,
                        c.point,
                        c.preimage.join(",")
                    ));
                }
                value["refinement"] = json!({ "morphism": f.to_doc(), "witness": w });
            }
            write_output(output, &value)?;
            Ok((text, value, 0))
        }
        Command::SpecExport { space, output } => {
            let x = load_space(space)?;
            let d = spec_export(&x)?;
            let value = serde_json::to_value(&d).expect("descriptors serialize");
            write_output(output, &value)?;
            Ok((d.render(), value, 0))
        }
        Command::Core { space } => {
            let x = load_space(space)?;
            let c = x.poset().core_reduction();
            let (n, degrees) = c.core.profile();
            let text = format!(
                "core: {{{}}}\nremoved: [{}]\nprofile: {n} points, degrees {degrees:?}\n",
                c.core.points().join(","),
                c.removed.join(",")
            );
            let value = json!({
                "core": c.core.to_doc(),
                "removed": c.removed,
                "profile": {"points": n, "degrees": degrees},
            });
            Ok((text, value, 0))
        }
    }
}

fn universe_name(x: &RingedFiniteSpace) -> String {
    match x.places() {
        Some(pl) => {
            let ids: Vec<String> = (0..pl.len()).map(|i| pl.get(i).id.clone()).collect();
            format!("rational over {} with places {}", pl.field(), ids.join(","))
        }
        None => format!("topological over {}", x.universe().coefficients()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok((text, value, code)) => {
            match cli.format {
                Format::Pretty => print!("{text}"),
                Format::Json => println!("{}", serde_json::to_string_pretty(&value).expect("values serialize")),
            }
            ExitCode::from(code)
        }
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
