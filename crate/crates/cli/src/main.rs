//! `polarsub`: construct polar subcodes, inspect post-transformations and
//! relaxation, decode LLR vectors and run BLER simulations.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use polar_subcode::bp::{decode, BpConfig};
use polar_subcode::construction::{load_info_set, CrcSpec, InfoSetSource, SubcodeSpec};
use polar_subcode::ensemble::{decode_list, EnsembleSpec};
use polar_subcode::gf2::{BitMatrix, BitVector};
use polar_subcode::scl::scl_decode;
use polar_subcode::sim::{ensemble_rng, write_csv, DecoderLabel, DecoderSpec, SimConfig, Simulator};
use polar_subcode::transform::{
    perm_matrices, post_transform, relax_constraints, AffinePerm, PermGroupKind, RelaxationPlan,
};

#[derive(Parser)]
#[command(name = "polarsub", version, about = "Polar subcode construction, BP ensemble and SCL decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the dynamic freezing constraints of a code.
    Construct(CommonOpts),
    /// Walk through permutation, post-transformation and relaxation of a code.
    TransformDemo(DemoOpts),
    /// Decode one vector of channel LLRs.
    Decode(DecodeOpts),
    /// Simulate one Eb/N0 point and write a CSV row.
    Simulate(SimOpts),
    /// Simulate a grid of Eb/N0 points and write CSV rows.
    Sweep(SimOpts),
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// log2 of the block length.
    #[arg(long)]
    n: Option<String>,
    /// Information set: comma-separated indices, `nr5g`, or a file of indices.
    #[arg(long)]
    info_set: Option<String>,
    /// Message bits for the `nr5g` information set (the set also holds the CRC bits).
    #[arg(long)]
    k: Option<String>,
    /// CRC polynomial: `none`, `DEG:0xMASK` or `x^8+x^5+x^4+x^3+1`.
    #[arg(long)]
    crc_poly: Option<String>,
    /// File of `key = value` lines using the long flag names; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct DecoderOpts {
    /// ca-bp, r-ca-bp, ca-bpl, p-ca-bpl, r-ca-bpl, pr-ca-bpl or ca-scl.
    #[arg(long)]
    decoder: Option<String>,
    /// Number of BP graphs or SCL paths.
    #[arg(long)]
    list_size: Option<String>,
    /// identity, lta, ga or stage.
    #[arg(long)]
    perm_group: Option<String>,
    /// Decode on relaxed graphs (`--relaxed` or `--relaxed false`).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    relaxed: Option<String>,
    /// BP iteration limit.
    #[arg(long)]
    max_iter: Option<String>,
    /// Use scaled min-sum instead of exact sum-product check updates.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    min_sum: Option<String>,
    /// Draw new permutations for every frame.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    fresh_perm: Option<String>,
}

#[derive(Args)]
struct DemoOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Rows of the affine matrix A, comma separated, e.g. `100,110,101`.
    #[arg(long)]
    a: Option<String>,
    /// Offset b as a bit string, index 0 first, e.g. `100`.
    #[arg(long)]
    b: Option<String>,
    /// Use the identity permutation.
    #[arg(long)]
    identity: bool,
    /// Skip the permutation and only relax.
    #[arg(long)]
    relax_only: bool,
}

#[derive(Args)]
struct DecodeOpts {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    decoder: DecoderOpts,
    /// Channel LLRs, comma or whitespace separated (positive favours 0).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "llr_file")]
    llr: Option<String>,
    /// File holding the channel LLRs.
    #[arg(long)]
    llr_file: Option<PathBuf>,
    /// Seed for drawing the permutations of an ensemble.
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Args)]
struct SimOpts {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    decoder: DecoderOpts,
    /// Eb/N0 in dB: `3.5`, `1,2,3` or `start:step:stop`.
    #[arg(long, allow_hyphen_values = true)]
    ebn0: Option<String>,
    /// Maximum frames per point.
    #[arg(long)]
    frames: Option<String>,
    /// Stop a point after this many frame errors (0 disables).
    #[arg(long)]
    min_frame_errors: Option<String>,
    /// Base seed for the channel and permutation streams (required).
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<String>,
    /// CSV output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Feed perfectly reliable LLRs instead of AWGN samples.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    noiseless: Option<String>,
}

/// Layered `key → value` settings: defaults, then the config file, then flags.
struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    fn new(defaults: &[(&str, &str)], config: Option<&Path>) -> Result<Self> {
        let mut values: BTreeMap<String, String> =
            defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if let Some(path) = config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| anyhow!("{}:{}: expected key = value", path.display(), lineno + 1))?;
                values.insert(key.trim().replace('_', "-"), value.trim().to_string());
            }
        }
        Ok(Self { values })
    }

    fn set(&mut self, key: &str, value: &Option<String>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.clone());
        }
    }

    fn apply_common(&mut self, c: &CommonOpts) {
        self.set("n", &c.n);
        self.set("info-set", &c.info_set);
        self.set("k", &c.k);
        self.set("crc-poly", &c.crc_poly);
    }

    fn apply_decoder(&mut self, d: &DecoderOpts) {
        self.set("decoder", &d.decoder);
        self.set("list-size", &d.list_size);
        self.set("perm-group", &d.perm_group);
        self.set("relaxed", &d.relaxed);
        self.set("max-iter", &d.max_iter);
        self.set("min-sum", &d.min_sum);
        self.set("fresh-perm", &d.fresh_perm);
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("invalid --{key} {v:?}: {e}")))
            .transpose()
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?.ok_or_else(|| anyhow!("missing --{key}"))
    }

    fn flag(&self, key: &str) -> Result<bool> {
        Ok(self.parse::<bool>(key)?.unwrap_or(false))
    }

    fn echo(&self) {
        let mut err = io::stderr().lock();
        for (k, v) in &self.values {
            let _ = writeln!(err, "# {k} = {v}");
        }
    }

    fn code(&self) -> Result<Arc<SubcodeSpec>> {
        let n: u32 = self.require("n")?;
        if !(1..=16).contains(&n) {
            bail!("--n must be between 1 and 16");
        }
        let len = 1usize << n;
        let crc: CrcSpec = self.parse("crc-poly")?.unwrap_or_else(CrcSpec::none);
        let info = self.get("info-set").unwrap_or("nr5g");
        let code = if info.eq_ignore_ascii_case("nr5g") {
            let k: usize = self.require("k")?;
            load_info_set(InfoSetSource::Nr5g, len, Some(k + crc.degree() as usize))?
        } else if info.chars().all(|c| c.is_ascii_digit() || c == ',' || c.is_whitespace()) {
            load_info_set(InfoSetSource::Text(&info.replace(',', " ")), len, None)?
        } else {
            load_info_set(InfoSetSource::File(Path::new(info)), len, None)?
        };
        Ok(Arc::new(SubcodeSpec::crc_aided(&code, &crc)?))
    }

    fn decoder(&self) -> Result<DecoderSpec> {
        let label: DecoderLabel = self.require("decoder")?;
        let mut spec = DecoderSpec::new(label);
        if let Some(l) = self.parse("list-size")? {
            spec = spec.with_list_size(l);
        }
        if let Some(g) = self.parse::<PermGroupKind>("perm-group")? {
            spec = spec.with_perm_group(g);
        }
        if let Some(r) = self.parse("relaxed")? {
            spec = spec.with_relaxed(r);
        }
        let mut bp = BpConfig::default();
        if let Some(it) = self.parse("max-iter")? {
            bp.max_iter = it;
        }
        bp.min_sum = self.flag("min-sum")?;
        Ok(spec.with_bp(bp).with_fresh_perm_per_frame(self.flag("fresh-perm")?))
    }
}

const CODE_DEFAULTS: [(&str, &str); 4] = [
    ("n", "7"),
    ("info-set", "nr5g"),
    ("k", "64"),
    ("crc-poly", "x^8+x^5+x^4+x^3+1"),
];

fn main() -> Result<()> {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Construct(c) => construct(&c, &mut out),
        Command::TransformDemo(d) => transform_demo(&d, &mut out),
        Command::Decode(d) => decode_cmd(&d, &mut out),
        Command::Simulate(s) => simulate(&s, false, &mut out),
        Command::Sweep(s) => simulate(&s, true, &mut out),
    }
}

fn code_settings(c: &CommonOpts, defaults: &[(&str, &str)]) -> Result<Settings> {
    let mut s = Settings::new(defaults, c.config.as_deref())?;
    s.apply_common(c);
    Ok(s)
}

fn positions(p: &[usize]) -> String {
    p.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn construct(c: &CommonOpts, out: &mut impl Write) -> Result<()> {
    let sub = code_settings(c, &CODE_DEFAULTS)?.code()?;
    writeln!(out, "N = {}, k = {}, constraints = {}", sub.len(), sub.k(), sub.constraints().rows())?;
    writeln!(out, "hard frozen: {}", positions(sub.hard_frozen()))?;
    for d in sub.dynamic() {
        writeln!(out, "dynamic {} = xor {}", d.index, positions(&d.support))?;
    }
    writeln!(out, "free: {}", positions(sub.free_positions()))?;
    writeln!(out, "V:\n{}", sub.constraints().to_text().trim_end())?;
    Ok(())
}

fn parse_affine(a: &str, b: &str, n: usize) -> Result<AffinePerm> {
    let rows: Vec<&str> = a.split(',').map(str::trim).collect();
    let a = BitMatrix::parse_text(&rows.join("\n"))?;
    let b_bits = b
        .trim()
        .chars()
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(anyhow!("offset must be a bit string, got {b:?}")),
        })
        .collect::<Result<Vec<u8>>>()?;
    if a.rows() != n || b_bits.len() != n {
        bail!("affine map must have {n} index bits");
    }
    Ok(AffinePerm::new(a, BitVector::from_bits(&b_bits))?)
}

fn transform_demo(d: &DemoOpts, out: &mut impl Write) -> Result<()> {
    let defaults = [
        ("n", "3"),
        ("info-set", "3,4,5,6,7"),
        ("crc-poly", "3:0x3"),
    ];
    let sub = code_settings(&d.common, &defaults)?.code()?;
    let n = sub.n() as usize;
    let perm = if d.identity || d.relax_only {
        AffinePerm::identity(sub.n())
    } else {
        match (&d.a, &d.b) {
            (Some(a), Some(b)) => parse_affine(a, b, n)?,
            (None, None) if n == 3 => parse_affine("100,110,101", "100", 3)?,
            (None, None) => bail!("give --a and --b for n != 3"),
            _ => bail!("--a and --b go together"),
        }
    };
    writeln!(out, "V:\n{}", sub.constraints().to_text().trim_end())?;
    let transformed = if d.relax_only {
        (*sub).clone()
    } else {
        let map: Vec<String> = perm.map().iter().map(|i| i.to_string()).collect();
        writeln!(out, "pi: {}", map.join(" "))?;
        let (_, t_inv) = perm_matrices(&perm);
        writeln!(out, "T_inv:\n{}", t_inv.to_text().trim_end())?;
        let empty = BitMatrix::zeros(0, sub.len());
        let (v_t, _) = post_transform(sub.constraints(), &empty, &t_inv)?;
        let t = SubcodeSpec::from_constraints(&v_t)?;
        writeln!(out, "V_T:\n{}", t.constraints().to_text().trim_end())?;
        t
    };
    let plan = RelaxationPlan::new(&transformed)?;
    let removed: Vec<String> = plan
        .classification()
        .removed_pes()
        .iter()
        .map(|(s, a, b)| format!("({s},{a},{b})"))
        .collect();
    writeln!(out, "removed: {}", removed.join(" "))?;
    writeln!(out, "R:\n{}", plan.r().to_text().trim_end())?;
    let v_tr = SubcodeSpec::from_constraints(&relax_constraints(transformed.constraints(), plan.r())?)?;
    writeln!(out, "V_T_R:\n{}", v_tr.constraints().to_text().trim_end())?;
    writeln!(out, "hard frozen: {}", positions(v_tr.hard_frozen()))?;
    Ok(())
}

fn parse_llrs(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| anyhow!("not an LLR: {t:?}")))
        .collect()
}

fn bits(v: &BitVector) -> String {
    v.to_string()
}

fn decode_cmd(d: &DecodeOpts, out: &mut impl Write) -> Result<()> {
    let mut s = code_settings(&d.common, &CODE_DEFAULTS)?;
    s.values.entry("decoder".into()).or_insert_with(|| "pr-ca-bpl".into());
    s.values.entry("seed".into()).or_insert_with(|| "0".into());
    s.apply_decoder(&d.decoder);
    s.set("seed", &d.seed);
    let sub = s.code()?;
    let spec = s.decoder()?;
    let seed: u64 = s.require("seed")?;
    let llr = match (&d.llr, &d.llr_file) {
        (Some(t), _) => parse_llrs(t)?,
        (None, Some(p)) => parse_llrs(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        (None, None) => bail!("give --llr or --llr-file"),
    };
    if llr.len() != sub.len() {
        bail!("expected {} LLRs, got {}", sub.len(), llr.len());
    }
    let (result, iterations, selected) = if spec.label.is_bp() {
        let e = EnsembleSpec::random(
            sub.clone(),
            spec.list_size,
            spec.perm_group,
            spec.relaxed,
            true,
            &mut ensemble_rng(seed),
        )?;
        if e.list_size() == 1 {
            let r = decode(&e.decoders()[0], &llr, &spec.bp)?;
            let it = vec![r.iterations];
            (r, it, 0)
        } else {
            let o = decode_list(&e, &llr, &spec.bp)?;
            (o.selected, o.iterations, o.selected_index)
        }
    } else {
        (scl_decode(&sub, &llr, spec.list_size)?, Vec::new(), 0)
    };
    let message: String = sub
        .message_of(&result.c_hat.to_bits())
        .iter()
        .map(|&b| if b == 1 { '1' } else { '0' })
        .collect();
    writeln!(out, "decoder: {} L={}", spec.label, spec.list_size)?;
    writeln!(out, "c_hat: {}", bits(&result.c_hat))?;
    writeln!(out, "v_hat: {}", bits(&result.v_hat))?;
    writeln!(out, "message: {message}")?;
    writeln!(out, "valid: {}", result.valid)?;
    writeln!(out, "metric: {}", result.metric)?;
    if spec.label.is_bp() {
        writeln!(out, "iterations: {}", positions(&iterations))?;
        writeln!(out, "selected: {selected}")?;
    }
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| anyhow!("bad Eb/N0 range {text:?}")))
            .collect::<Result<_>>()?;
        let (start, step, stop) = (v[0], v[1], v[2]);
        if step <= 0.0 || stop < start {
            bail!("Eb/N0 range needs a positive step and start <= stop");
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Round to the step's precision so the CSV shows 3.5 rather than 3.5000000000000004.
        return Ok((0..count).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect());
    }
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| anyhow!("bad Eb/N0 value {t:?}")))
        .collect()
}

fn simulate(o: &SimOpts, sweep: bool, out: &mut impl Write) -> Result<()> {
    let mut s = code_settings(&o.common, &CODE_DEFAULTS)?;
    for (k, v) in [
        ("decoder", "pr-ca-bpl"),
        ("frames", "1000000"),
        ("min-frame-errors", "200"),
        ("threads", "0"),
    ] {
        s.values.entry(k.into()).or_insert_with(|| v.into());
    }
    s.apply_decoder(&o.decoder);
    s.set("ebn0", &o.ebn0);
    s.set("frames", &o.frames);
    s.set("min-frame-errors", &o.min_frame_errors);
    s.set("seed", &o.seed);
    s.set("threads", &o.threads);
    s.set("noiseless", &o.noiseless);
    if let Some(p) = &o.out {
        s.values.insert("out".into(), p.display().to_string());
    }
    s.echo();

    let seed: u64 = s.parse("seed")?.ok_or_else(|| anyhow!("--seed is required"))?;
    let grid = parse_grid(s.get("ebn0").ok_or_else(|| anyhow!("missing --ebn0"))?)?;
    if grid.is_empty() {
        bail!("empty Eb/N0 grid");
    }
    if !sweep && grid.len() != 1 {
        bail!("simulate takes a single Eb/N0 value; use sweep for a grid");
    }
    let frames: u64 = s.require("frames")?;
    if frames == 0 {
        bail!("--frames must be positive");
    }
    let min_errors: u64 = s.require("min-frame-errors")?;
    let mut cfg = SimConfig::new(s.code()?, s.decoder()?, grid, seed);
    cfg.max_frames = frames;
    cfg.min_frame_errors = (min_errors > 0).then_some(min_errors);
    cfg.threads = s.require("threads")?;
    cfg.noiseless = s.flag("noiseless")?;
    let sim = Simulator::new(cfg)?;

    let mut points = Vec::new();
    for (i, &e) in sim.config().ebn0_db.iter().enumerate() {
        let p = sim.run_point(i as u64, e)?;
        eprintln!(
            "{} Eb/N0 = {} dB: {} errors in {} frames, BLER {:.3e}",
            p.decoder,
            e,
            p.frame_errors,
            p.frames,
            p.bler()
        );
        points.push(p);
    }
    match s.get("out") {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {path}"))?;
            write_csv(&points, io::BufWriter::new(file))?;
        }
        None => write_csv(&points, out)?,
    }
    Ok(())
}
