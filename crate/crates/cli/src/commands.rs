use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use sigsal_core::io::{read_gray_image, read_tensor, write_gray_image, write_rgb_image, write_tensor};
use sigsal_core::micronet::{forward, load_model, reference_model};
use sigsal_core::saliency::{
    render_overlay, saliency_map, suppress_background, ActivationStack, BilateralParams, SaliencyMap, SaliencyMethod,
};
use sigsal_core::sanity::{run_sanity, write_run, RandomizationMode};
use sigsal_core::spectral::{dct, idct, Basis, SpectralTensor};
use sigsal_core::theorem::{estimate_bound, write_trials_csv, SparseMixSpec, TheoremSummary};
use sigsal_core::wsol::{self, boxes_from_map, Connectivity};
use sigsal_core::{Seed, TensorF64};

use crate::{
    BoxesArgs, Cli, Command, ConnectivityArg, DctArgs, FilterArgs, InferArgs, MapArgs, MethodArg, MicronetInitArgs,
    ModeArg, SanityArgs, SuppressArgs, TheoremArgs, WsolArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    let summary = match &cli.command {
        Command::Dct(a) => cmd_dct(a),
        Command::Suppress(a) => cmd_suppress(a),
        Command::Map(a) => cmd_map(a),
        Command::Boxes(a) => cmd_boxes(a),
        Command::Wsol(a) => cmd_wsol(a),
        Command::Sanity(a) => cmd_sanity(a),
        Command::Theorem(a) => cmd_theorem(a),
        Command::Infer(a) => cmd_infer(a),
        Command::MicronetInit(a) => cmd_micronet_init(a),
    }?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        print_plain(&summary);
    }
    Ok(())
}

fn print_plain(v: &Value) {
    if let Value::Object(map) = v {
        for (k, v) in map {
            match v {
                Value::String(s) => println!("{k}: {s}"),
                other => println!("{k}: {other}"),
            }
        }
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default()
}

fn load_image(path: &Path) -> Result<TensorF64> {
    let t = match extension(path).as_str() {
        "pgm" => read_gray_image(path)?,
        "npy" => read_tensor(path)?,
        other => bail!("{}: unsupported image extension {other:?} (use .pgm or .npy)", path.display()),
    };
    Ok(t)
}

fn as_plane(img: &TensorF64) -> Result<TensorF64> {
    match img.shape() {
        [_, _] => Ok(img.clone()),
        [1, h, w] => Ok(img.clone().reshape([*h, *w])?),
        s => bail!("expected a grayscale image, got shape {s:?}"),
    }
}

fn spatial_dims(img: &TensorF64) -> Result<(usize, usize)> {
    match img.shape() {
        [h, w] | [_, h, w] => Ok((*h, *w)),
        s => bail!("image must be [h, w] or [c, h, w], got {s:?}"),
    }
}

fn save_plane(t: &TensorF64, path: &Path) -> Result<()> {
    match extension(path).as_str() {
        "npy" => write_tensor(t, path)?,
        "pgm" => write_gray_image(t, path)?,
        other => bail!("{}: unsupported output extension {other:?} (use .npy or .pgm)", path.display()),
    }
    Ok(())
}

fn params(f: &FilterArgs) -> Result<BilateralParams<f64>> {
    Ok(BilateralParams::new(f.sigma_spatial, f.sigma_range, f.radius)?)
}

fn connectivity(c: ConnectivityArg) -> Connectivity {
    match c {
        ConnectivityArg::Four => Connectivity::Four,
        ConnectivityArg::Eight => Connectivity::Eight,
    }
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_dct(a: &DctArgs) -> Result<Value> {
    let x = read_tensor(&a.input)?;
    let y = if a.inverse {
        idct(&SpectralTensor::new(x, Basis::Dct))?
    } else {
        dct(&x)?.coefficients
    };
    write_tensor(&y, &a.out)?;
    Ok(json!({
        "out": a.out.display().to_string(),
        "shape": y.shape(),
        "inverse": a.inverse,
    }))
}

fn cmd_suppress(a: &SuppressArgs) -> Result<Value> {
    let img = as_plane(&load_image(&a.input)?)?;
    let out = suppress_background(&img)?;
    save_plane(&out, &a.out)?;
    Ok(json!({
        "out": a.out.display().to_string(),
        "shape": out.shape(),
    }))
}

fn cmd_map(a: &MapArgs) -> Result<Value> {
    let image = a.image.as_deref().map(load_image).transpose()?;
    let acts = match (&a.activations, &a.model) {
        (Some(path), _) => read_tensor(path)?,
        (None, Some(dir)) => {
            let model = load_model(dir)?;
            let img = image.as_ref().expect("clap requires --image with --model");
            let layer = a.layer.as_deref().expect("clap requires --layer with --model");
            forward(&model, img)?.output(layer)?.clone()
        }
        (None, None) => unreachable!("clap requires --activations or --model"),
    };
    let stack = ActivationStack::new(acts)?;
    let (def_h, def_w) = match &image {
        Some(img) => spatial_dims(img)?,
        None => (stack.height(), stack.width()),
    };
    let (h, w) = (a.height.unwrap_or(def_h), a.width.unwrap_or(def_w));
    let method = match a.method {
        MethodArg::Signature => SaliencyMethod::Signature,
        MethodArg::Eigen => SaliencyMethod::Eigen,
    };
    let map = saliency_map(method, &stack, h, w, &params(&a.filter)?)?;
    save_plane(map.values(), &a.out)?;
    if let Some(path) = &a.overlay {
        let base = as_plane(image.as_ref().expect("clap requires --image with --overlay"))?;
        write_rgb_image(&render_overlay(&base, &map, a.alpha)?, path)?;
    }
    Ok(json!({
        "out": a.out.display().to_string(),
        "height": h,
        "width": w,
        "channels": stack.channels(),
        "method": method,
        "min": map.values().min(),
        "max": map.values().max(),
        "overlay": a.overlay.as_ref().map(|p| p.display().to_string()),
    }))
}

fn cmd_boxes(a: &BoxesArgs) -> Result<Value> {
    let map = SaliencyMap::new(read_tensor(&a.input)?)?;
    let sel = serde_json::to_value(boxes_from_map(&map, a.target, connectivity(a.connectivity))?)?;
    if let Some(out) = &a.out {
        write_json(out, &sel)?;
    }
    Ok(sel)
}

fn cmd_wsol(a: &WsolArgs) -> Result<Value> {
    let records = wsol::load_records(&a.manifest)?;
    let report = wsol::evaluate(records, connectivity(a.connectivity))?;
    if let Some(out) = &a.out {
        write_json(out, &serde_json::to_value(&report)?)?;
    }
    Ok(json!({
        "error_rate": report.error_rate,
        "total": report.total,
        "negatives": report.negatives,
        "report": a.out.as_ref().map(|p| p.display().to_string()),
    }))
}

fn cmd_sanity(a: &SanityArgs) -> Result<Value> {
    let model = load_model(&a.model)?;
    let img = load_image(&a.image)?;
    let mode = match a.mode {
        ModeArg::Cascading => RandomizationMode::Cascading,
        ModeArg::Independent => RandomizationMode::Independent,
    };
    let run = run_sanity(&model, &img, &a.layer, mode, Seed(a.seed), &params(&a.filter)?)?;
    write_run(&a.out, &run)?;
    let stages: Vec<Value> = run
        .stages
        .iter()
        .map(|s| {
            json!({
                "layer": s.layer,
                "upstream": s.upstream,
                "spearman": s.spearman,
                "max_abs_diff": s.max_abs_diff,
            })
        })
        .collect();
    Ok(json!({
        "out": a.out.display().to_string(),
        "mode": mode,
        "layer": a.layer,
        "stages": stages,
    }))
}

fn cmd_theorem(a: &TheoremArgs) -> Result<Value> {
    let spec = SparseMixSpec::new(a.n, a.fg, a.bg, Seed(a.seed));
    let est = estimate_bound(&spec, a.trials)?;
    let summary = serde_json::to_value(TheoremSummary::new(&spec, &est))?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_trials_csv(&dir.join("trials.csv"), &est)?;
        write_json(&dir.join("summary.json"), &summary)?;
    }
    let mut v = summary;
    v["in_theorem"] = json!(spec.is_in_theorem());
    Ok(v)
}

fn cmd_infer(a: &InferArgs) -> Result<Value> {
    let model = load_model(&a.model)?;
    let img = load_image(&a.image)?;
    let trace = forward(&model, &img)?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, t) in &trace.outputs {
            write_tensor(t, dir.join(format!("{name}.npy")))?;
        }
        write_tensor(&trace.probabilities, dir.join("probabilities.npy"))?;
    }
    let probs = trace.probabilities.data();
    let top = probs
        .iter()
        .enumerate()
        .fold(0, |best, (i, &p)| if p > probs[best] { i } else { best });
    Ok(json!({
        "probabilities": probs,
        "top_class": top,
        "layers": trace.outputs.iter().map(|(n, t)| json!({"name": n, "shape": t.shape()})).collect::<Vec<_>>(),
    }))
}

fn cmd_micronet_init(a: &MicronetInitArgs) -> Result<Value> {
    let model = reference_model::<f64>(Seed(a.seed))?;
    model.save(&a.out)?;
    Ok(json!({
        "out": a.out.display().to_string(),
        "input_shape": model.input_shape(),
        "layers": model.layers().iter().map(|l| l.name.clone()).collect::<Vec<_>>(),
    }))
}
