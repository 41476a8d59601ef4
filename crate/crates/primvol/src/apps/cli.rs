//! The command-line pipelines. Every run writes a JSON manifest capturing
//! the resolved flag values, seeds, outputs, and timings; feeding the
//! manifest's args back through `cli_main` re-runs the command and, with
//! the numerics being thread-count invariant, reproduces the outputs
//! bitwise.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::body::{init_primitive_frames, lbs_pose, load_rigged_mesh, pose_primitives, Pose};
use crate::diffusion::{
    inpaint, load_packed_tensor, make_schedule, pack, sample, save_packed_tensor, unpack,
    NearestNeighborDenoiser, Normalization, PackedTensor, DEFAULT_BETA_END, DEFAULT_BETA_START,
};
use crate::error::{Error, Result};
use crate::fitting::{fit_subject, FitConfig};
use crate::fsutil::atomic_write;
use crate::math::Vec3;
use crate::renderer::{render, MarchConfig, PrimitiveSet, RenderOutput};

use super::formats::{
    listed_files, load_cameras, load_pose_sequence, load_primitive_set, save_loss_trace,
    save_pfm, save_png, save_primitive_set,
};
use super::synth::{load_dataset, make_synthetic_subject, save_dataset};
use super::transfer::transfer_texture;

/// Record of one CLI run: enough to repeat it exactly.
#[derive(Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Resolved long-form flag values, including defaults.
    pub args: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    fn new(command: &str) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            args: BTreeMap::new(),
            outputs: Vec::new(),
            metrics: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    /// Command line that repeats this run (without the binary name).
    pub fn rerun_args(&self) -> Vec<String> {
        let mut argv = vec![self.command.clone()];
        for (key, value) in &self.args {
            argv.push(format!("--{key}"));
            argv.push(value.clone());
        }
        argv
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e.to_string()))?;
        atomic_write(path, text.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunManifest> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

#[derive(Parser)]
#[command(name = "primvol", version, about = "Volumetric-primitive body toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-view capture of a textured toy body.
    MakeSynth(MakeSynthArgs),
    /// Fit a primitive set to a capture directory by inverse rendering.
    Fit(FitArgs),
    /// Render a primitive set from every camera in a rig file.
    Render(RenderArgs),
    /// Re-pose a set along a pose sequence and render each frame.
    Animate(AnimateArgs),
    /// Draw a new subject tensor from a dataset via reverse diffusion.
    Sample(SampleArgs),
    /// Regenerate the masked region of a packed tensor, keeping the rest.
    Inpaint(InpaintArgs),
    /// Move one set's color payloads onto another set's geometry.
    Transfer(TransferArgs),
    /// Time repeated renders and report ms/frame and FPS.
    Bench(BenchArgs),
}

#[derive(Args)]
struct MakeSynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Number of ring cameras.
    #[arg(long, default_value_t = 36)]
    views: usize,
    /// Square image resolution.
    #[arg(long, default_value_t = 128)]
    res: usize,
    /// Primitive grid width W (the set holds W*W primitives).
    #[arg(long, default_value_t = 16)]
    grid: usize,
    /// Payload voxel resolution S.
    #[arg(long, default_value_t = 4)]
    payload: usize,
}

#[derive(Args)]
struct FitArgs {
    /// Capture directory produced by make-synth (or laid out the same way).
    #[arg(long)]
    data: PathBuf,
    /// Output primitive set file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    grid: usize,
    #[arg(long, default_value_t = 4)]
    payload: usize,
    /// Worker threads (defaults to all cores). Outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    set: PathBuf,
    /// JSON camera rig; one image per camera.
    #[arg(long)]
    camera: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct AnimateArgs {
    #[arg(long)]
    set: PathBuf,
    /// Rigged mesh the set was fitted on.
    #[arg(long)]
    mesh: PathBuf,
    /// JSON pose sequence; one frame per pose.
    #[arg(long)]
    pose: PathBuf,
    /// JSON camera rig; the first camera films the animation.
    #[arg(long)]
    camera: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SampleArgs {
    /// Directory of .pkt tensors and/or .prm sets forming the dataset.
    #[arg(long)]
    dataset: PathBuf,
    /// Output packed tensor (.pkt).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also unpack onto this rigged mesh and write a .prm next to --out.
    #[arg(long)]
    mesh: Option<PathBuf>,
}

#[derive(Args)]
struct InpaintArgs {
    /// Directory of .pkt tensors and/or .prm sets forming the dataset.
    #[arg(long)]
    dataset: PathBuf,
    /// Packed tensor holding the known values.
    #[arg(long)]
    data: PathBuf,
    /// Packed tensor of {0,1}: 0 pins an entry to --data, 1 lets it evolve.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also unpack onto this rigged mesh and write a .prm next to --out.
    #[arg(long)]
    mesh: Option<PathBuf>,
}

#[derive(Args)]
struct TransferArgs {
    /// Source set providing the color payloads.
    #[arg(long)]
    data: PathBuf,
    /// Target set providing geometry and density.
    #[arg(long)]
    set: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    set: PathBuf,
    /// JSON camera rig; the first camera is timed.
    #[arg(long)]
    camera: PathBuf,
    #[arg(long, default_value_t = 50)]
    repeat: usize,
    /// Manifest output path; the manifest is the benchmark report.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

/// Entry point behind the binary. Returns the process exit code: 0 on
/// success, 2 for usage errors, then 3/4/5/6 for validation, I/O, format,
/// and runtime failures.
pub fn cli_main(args: &[String]) -> i32 {
    let mut argv = Vec::with_capacity(args.len() + 1);
    argv.push("primvol".to_string());
    argv.extend_from_slice(args);
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation(_) => 3,
                Error::Io { .. } => 4,
                Error::Format { .. } => 5,
                Error::Runtime(_) => 6,
            }
        }
    }
}

fn set_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // Outputs are thread-count invariant (all reductions preserve
        // order), so a pool that was already built is fine to keep.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn arg_path(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn run(command: &Command) -> Result<String> {
    let started = Instant::now();
    let (mut manifest, manifest_path, summary) = match command {
        Command::MakeSynth(a) => run_make_synth(a)?,
        Command::Fit(a) => run_fit(a)?,
        Command::Render(a) => run_render(a)?,
        Command::Animate(a) => run_animate(a)?,
        Command::Sample(a) => run_sample(a)?,
        Command::Inpaint(a) => run_inpaint(a)?,
        Command::Transfer(a) => run_transfer(a)?,
        Command::Bench(a) => run_bench(a)?,
    };
    manifest
        .timings_ms
        .insert("total".to_string(), started.elapsed().as_secs_f64() * 1e3);
    manifest.save(&manifest_path)?;
    Ok(format!("{summary} (manifest: {})", manifest_path.display()))
}

fn run_make_synth(a: &MakeSynthArgs) -> Result<(RunManifest, PathBuf, String)> {
    let mut m = RunManifest::new("make-synth");
    m.args.insert("out".into(), arg_path(&a.out));
    m.args.insert("seed".into(), a.seed.to_string());
    m.args.insert("views".into(), a.views.to_string());
    m.args.insert("res".into(), a.res.to_string());
    m.args.insert("grid".into(), a.grid.to_string());
    m.args.insert("payload".into(), a.payload.to_string());
    let subject = make_synthetic_subject(a.seed, a.grid, a.payload, a.views, a.res)?;
    m.outputs = save_dataset(&a.out, &subject)?;
    let summary = format!("wrote {} views to {}", a.views, a.out.display());
    Ok((m, a.out.join("manifest.json"), summary))
}

fn run_fit(a: &FitArgs) -> Result<(RunManifest, PathBuf, String)> {
    set_threads(a.threads);
    let mut m = RunManifest::new("fit");
    m.args.insert("data".into(), arg_path(&a.data));
    m.args.insert("out".into(), arg_path(&a.out));
    m.args.insert("iters".into(), a.iters.to_string());
    m.args.insert("seed".into(), a.seed.to_string());
    m.args.insert("grid".into(), a.grid.to_string());
    m.args.insert("payload".into(), a.payload.to_string());
    let (mesh, views) = load_dataset(&a.data)?;
    let frames = init_primitive_frames(&mesh, a.grid)?;
    let cfg = FitConfig {
        iterations: a.iters,
        seed: a.seed,
        payload_res: a.payload,
        ..FitConfig::default()
    };
    let result = fit_subject(&views, &mesh, &frames, &cfg)?;
    save_primitive_set(&a.out, &result.set)?;
    m.outputs.push(arg_path(&a.out));
    let trace_path = sibling(&a.out, ".trace.csv");
    save_loss_trace(&trace_path, &result.trace)?;
    m.outputs.push(arg_path(&trace_path));
    if let Some(last) = result.trace.last() {
        m.metrics.insert("final_total".into(), last.total);
        m.metrics.insert("final_rgb".into(), last.rgb);
        m.metrics.insert("final_sil".into(), last.sil);
        m.metrics.insert("final_vol".into(), last.vol);
    }
    let summary = format!("fitted {} iterations -> {}", a.iters, a.out.display());
    Ok((m, sibling(&a.out, ".manifest.json"), summary))
}

fn write_view_files(
    dir: &Path,
    stem: &str,
    out: &RenderOutput,
    outputs: &mut Vec<String>,
) -> Result<()> {
    let (w, h) = (out.width, out.height);
    let png = dir.join(format!("{stem}.png"));
    save_png(&png, w, h, &out.rgb)?;
    outputs.push(arg_path(&png));
    let pfm = dir.join(format!("{stem}.pfm"));
    save_pfm(&pfm, w, h, &out.rgb)?;
    outputs.push(arg_path(&pfm));
    let alpha = dir.join(format!("{stem}_alpha.pfm"));
    save_pfm(&alpha, w, h, &out.alpha)?;
    outputs.push(arg_path(&alpha));
    let depth = dir.join(format!("{stem}_depth.pfm"));
    save_pfm(&depth, w, h, &out.depth)?;
    outputs.push(arg_path(&depth));
    Ok(())
}

fn run_render(a: &RenderArgs) -> Result<(RunManifest, PathBuf, String)> {
    set_threads(a.threads);
    let mut m = RunManifest::new("render");
    m.args.insert("set".into(), arg_path(&a.set));
    m.args.insert("camera".into(), arg_path(&a.camera));
    m.args.insert("out".into(), arg_path(&a.out));
    let set = load_primitive_set(&a.set)?;
    let cameras = load_cameras(&a.camera)?;
    if cameras.is_empty() {
        return Err(Error::validation("camera rig is empty"));
    }
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let march = MarchConfig::for_set(&set);
    for (i, camera) in cameras.iter().enumerate() {
        let out = render(&set, camera, &march)?;
        write_view_files(&a.out, &format!("view_{i:03}"), &out, &mut m.outputs)?;
    }
    let summary = format!("rendered {} views to {}", cameras.len(), a.out.display());
    Ok((m, a.out.join("manifest.json"), summary))
}

fn run_animate(a: &AnimateArgs) -> Result<(RunManifest, PathBuf, String)> {
    set_threads(a.threads);
    let mut m = RunManifest::new("animate");
    m.args.insert("set".into(), arg_path(&a.set));
    m.args.insert("mesh".into(), arg_path(&a.mesh));
    m.args.insert("pose".into(), arg_path(&a.pose));
    m.args.insert("camera".into(), arg_path(&a.camera));
    m.args.insert("out".into(), arg_path(&a.out));
    let set = load_primitive_set(&a.set)?;
    let mesh = load_rigged_mesh(&a.mesh)?;
    let poses = load_pose_sequence(&a.pose)?;
    if poses.is_empty() {
        return Err(Error::validation("pose sequence is empty"));
    }
    let cameras = load_cameras(&a.camera)?;
    let camera = cameras.first().ok_or_else(|| Error::validation("camera rig is empty"))?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let frames = init_primitive_frames(&mesh, set.grid_width)?;
    let deltas: Vec<Vec3> = set.kin.iter().map(|k| k.delta_scale).collect();
    // one march config for the whole clip so step size cannot flicker
    let march = MarchConfig::for_set(&set);
    for (f, pose) in poses.iter().enumerate() {
        let posed = lbs_pose(&mesh, pose)?;
        let kin = pose_primitives(&frames, &posed, &deltas)?;
        let posed_set = PrimitiveSet { kin, ..set.clone() };
        let out = render(&posed_set, camera, &march)?;
        write_view_files(&a.out, &format!("frame_{f:03}"), &out, &mut m.outputs)?;
    }
    let summary = format!("animated {} frames to {}", poses.len(), a.out.display());
    Ok((m, a.out.join("manifest.json"), summary))
}

/// Loads every .pkt and .prm in the directory as dataset items. Tensor
/// sidecars must agree on one normalization; sets are packed with it.
fn load_tensor_dataset(dir: &Path) -> Result<(Vec<PackedTensor>, Normalization)> {
    let mut items = Vec::new();
    let mut norm: Option<Normalization> = None;
    for path in listed_files(dir, "pkt")? {
        let (tensor, n) = load_packed_tensor(&path)?;
        match norm {
            None => norm = Some(n),
            Some(have) if have != n => {
                return Err(Error::validation(format!(
                    "{} uses a different normalization from earlier dataset items",
                    path.display()
                )));
            }
            Some(_) => {}
        }
        items.push(tensor);
    }
    let norm = norm.unwrap_or_default();
    for path in listed_files(dir, "prm")? {
        let set = load_primitive_set(&path)?;
        items.push(pack(&set, &norm)?);
    }
    if items.is_empty() {
        return Err(Error::validation(format!(
            "no .pkt or .prm dataset items in {}",
            dir.display()
        )));
    }
    Ok((items, norm))
}

fn unpack_to_prm(
    tensor: &PackedTensor,
    norm: &Normalization,
    mesh_path: &Path,
    out: &Path,
    outputs: &mut Vec<String>,
) -> Result<()> {
    let mesh = load_rigged_mesh(mesh_path)?;
    let frames = init_primitive_frames(&mesh, tensor.grid_width())?;
    let posed = lbs_pose(&mesh, &Pose::rest(mesh.joints.len()))?;
    let set = unpack(tensor, &frames, &posed, norm)?;
    let prm = out.with_extension("prm");
    save_primitive_set(&prm, &set)?;
    outputs.push(arg_path(&prm));
    Ok(())
}

fn run_sample(a: &SampleArgs) -> Result<(RunManifest, PathBuf, String)> {
    let mut m = RunManifest::new("sample");
    m.args.insert("dataset".into(), arg_path(&a.dataset));
    m.args.insert("out".into(), arg_path(&a.out));
    m.args.insert("steps".into(), a.steps.to_string());
    m.args.insert("seed".into(), a.seed.to_string());
    if let Some(mesh) = &a.mesh {
        m.args.insert("mesh".into(), arg_path(mesh));
    }
    let (items, norm) = load_tensor_dataset(&a.dataset)?;
    let (w, s) = (items[0].grid_width(), items[0].payload_res());
    let denoiser = NearestNeighborDenoiser::new(items)?;
    let schedule = make_schedule(a.steps, DEFAULT_BETA_START, DEFAULT_BETA_END)?;
    let mut rng = ChaCha12Rng::seed_from_u64(a.seed);
    let tensor = sample(&denoiser, &schedule, w, s, &mut rng)?;
    save_packed_tensor(&a.out, &tensor, &norm)?;
    m.outputs.push(arg_path(&a.out));
    if let Some(mesh_path) = &a.mesh {
        unpack_to_prm(&tensor, &norm, mesh_path, &a.out, &mut m.outputs)?;
    }
    m.metrics.insert("steps".into(), a.steps as f64);
    let summary = format!("sampled {} steps -> {}", a.steps, a.out.display());
    Ok((m, sibling(&a.out, ".manifest.json"), summary))
}

fn run_inpaint(a: &InpaintArgs) -> Result<(RunManifest, PathBuf, String)> {
    let mut m = RunManifest::new("inpaint");
    m.args.insert("dataset".into(), arg_path(&a.dataset));
    m.args.insert("data".into(), arg_path(&a.data));
    m.args.insert("mask".into(), arg_path(&a.mask));
    m.args.insert("out".into(), arg_path(&a.out));
    m.args.insert("steps".into(), a.steps.to_string());
    m.args.insert("seed".into(), a.seed.to_string());
    if let Some(mesh) = &a.mesh {
        m.args.insert("mesh".into(), arg_path(mesh));
    }
    let (items, norm) = load_tensor_dataset(&a.dataset)?;
    let denoiser = NearestNeighborDenoiser::new(items)?;
    let (known, known_norm) = load_packed_tensor(&a.data)?;
    if known_norm != norm {
        return Err(Error::validation(
            "known tensor uses a different normalization from the dataset",
        ));
    }
    let (mask, _) = load_packed_tensor(&a.mask)?;
    let schedule = make_schedule(a.steps, DEFAULT_BETA_START, DEFAULT_BETA_END)?;
    let mut rng = ChaCha12Rng::seed_from_u64(a.seed);
    let tensor = inpaint(&denoiser, &schedule, &known, &mask, &mut rng)?;
    save_packed_tensor(&a.out, &tensor, &norm)?;
    m.outputs.push(arg_path(&a.out));
    if let Some(mesh_path) = &a.mesh {
        unpack_to_prm(&tensor, &norm, mesh_path, &a.out, &mut m.outputs)?;
    }
    let summary = format!("inpainted {} steps -> {}", a.steps, a.out.display());
    Ok((m, sibling(&a.out, ".manifest.json"), summary))
}

fn run_transfer(a: &TransferArgs) -> Result<(RunManifest, PathBuf, String)> {
    let mut m = RunManifest::new("transfer");
    m.args.insert("data".into(), arg_path(&a.data));
    m.args.insert("set".into(), arg_path(&a.set));
    m.args.insert("out".into(), arg_path(&a.out));
    let src = load_primitive_set(&a.data)?;
    let dst = load_primitive_set(&a.set)?;
    let out = transfer_texture(&src, &dst)?;
    save_primitive_set(&a.out, &out)?;
    m.outputs.push(arg_path(&a.out));
    let summary = format!("transferred textures -> {}", a.out.display());
    Ok((m, sibling(&a.out, ".manifest.json"), summary))
}

fn run_bench(a: &BenchArgs) -> Result<(RunManifest, PathBuf, String)> {
    set_threads(a.threads);
    let mut m = RunManifest::new("bench");
    m.args.insert("set".into(), arg_path(&a.set));
    m.args.insert("camera".into(), arg_path(&a.camera));
    m.args.insert("repeat".into(), a.repeat.to_string());
    m.args.insert("out".into(), arg_path(&a.out));
    if a.repeat == 0 {
        return Err(Error::validation("repeat count must be at least 1"));
    }
    let set = load_primitive_set(&a.set)?;
    let cameras = load_cameras(&a.camera)?;
    let camera = cameras.first().ok_or_else(|| Error::validation("camera rig is empty"))?;
    let march = MarchConfig::for_set(&set);
    render(&set, camera, &march)?; // warm caches before timing
    let started = Instant::now();
    for _ in 0..a.repeat {
        std::hint::black_box(render(&set, camera, &march)?);
    }
    let mean_ms = started.elapsed().as_secs_f64() * 1e3 / a.repeat as f64;
    m.metrics.insert("mean_ms_per_frame".into(), mean_ms);
    m.metrics.insert("fps".into(), 1e3 / mean_ms);
    m.metrics.insert("width".into(), camera.width as f64);
    m.metrics.insert("height".into(), camera.height as f64);
    let summary = format!(
        "{} renders at {}x{}: {:.2} ms/frame ({:.2} FPS)",
        a.repeat,
        camera.width,
        camera.height,
        mean_ms,
        1e3 / mean_ms
    );
    Ok((m, a.out.clone(), summary))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(suffix);
    PathBuf::from(os)
}
