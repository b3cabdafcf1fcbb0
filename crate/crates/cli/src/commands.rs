use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use baomi::checkpoint::{load_checkpoint, save_checkpoint};
use baomi::dsp::{load_wav, pad_to_max, CepstralExtractor, SpectralConfig};
use baomi::io::{read_fvec, write_fvec, DatasetManifest, FeatureRecord};
use baomi::train::{run_cv, write_embeddings_csv, write_head_weights_csv, Dataset, EvalReport, TrainConfig};

use crate::{ExportArgs, FeaturesArgs, ReportArgs, TrainArgs};

pub fn features(args: FeaturesArgs) -> Result<()> {
    let manifest = DatasetManifest::read(&args.manifest)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    let (kept, dropped) = manifest.filter_known();
    for id in &dropped {
        log::warn!("skipping {id}: label is Unknown");
    }
    if kept.is_empty() {
        bail!("manifest {} has no Present or Absent rows", args.manifest.display());
    }

    let mut clips = Vec::with_capacity(kept.len());
    let mut failures = Vec::new();
    for (row, _) in &kept {
        match load_wav(&row.wav_path) {
            Ok(mut clip) => {
                clip.recording_id = row.recording_id.clone();
                clips.push(clip);
            }
            Err(e) => failures.push(format!("{}: {e}", row.wav_path.display())),
        }
    }
    if !failures.is_empty() {
        bail!("{} recording(s) could not be read:\n  {}", failures.len(), failures.join("\n  "));
    }

    let clips = pad_to_max(&clips)?;
    let extractor = CepstralExtractor::new(args.kind, &SpectralConfig::default(), clips[0].sample_rate_hz)?;
    let mut records = Vec::with_capacity(clips.len());
    let mut failures = Vec::new();
    for ((clip, (_, label)), result) in clips.iter().zip(&kept).zip(extractor.extract_all(&clips)) {
        match result {
            Ok(v) => records.push(FeatureRecord::new(
                clip.recording_id.clone(),
                *label,
                v.into_iter().map(|x| x as f32).collect(),
            )),
            Err(e) => failures.push(format!("{}: {e}", clip.recording_id)),
        }
    }
    if !failures.is_empty() {
        bail!("feature extraction failed:\n  {}", failures.join("\n  "));
    }
    write_fvec(&records, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} records of dimension {} to {}",
        records.len(),
        extractor.n_coefficients(),
        args.out.display()
    );
    Ok(())
}

fn load_dataset(a: &Path, b: Option<&Path>) -> Result<Dataset> {
    let ra = read_fvec(a).with_context(|| format!("reading {}", a.display()))?;
    Ok(match b {
        Some(b) => {
            let rb = read_fvec(b).with_context(|| format!("reading {}", b.display()))?;
            Dataset::paired(&ra, &rb).with_context(|| format!("aligning {} with {}", a.display(), b.display()))?
        }
        None => Dataset::single(&ra)?,
    })
}

fn train_config(args: &TrainArgs) -> TrainConfig {
    let mut c = TrainConfig::new(args.model, args.seed);
    if let Some(v) = args.epochs {
        c.epochs = v;
    }
    if let Some(v) = args.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        c.adam.learning_rate = v;
    }
    if let Some(v) = args.heads {
        c.fusion.n_heads = v;
    }
    if let Some(v) = args.head_dim {
        c.fusion.head_dim = v;
    }
    if let Some(v) = args.gamma {
        c.fusion.gamma = v;
    }
    if let Some(v) = args.bandit_every {
        c.fusion.bandit_update_every = Some(v);
    }
    c.fusion.shared_head_weights = args.shared_head_weights;
    c.standardize = !args.no_standardize;
    c
}

pub fn train(args: TrainArgs) -> Result<()> {
    match (args.model.is_fusion(), &args.b) {
        (true, None) => bail!("--model {} needs both --a and --b", args.model),
        (false, Some(_)) => bail!("--model {} takes only --a", args.model),
        _ => {}
    }
    let config = train_config(&args);
    config.validate()?;
    let data = load_dataset(&args.a, args.b.as_deref())?;
    log::info!("{} recordings, dims {:?}, model {}", data.len(), data.dims(), config.model);

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let outcome = run_cv(&config, &data)?;
    for f in &outcome.folds {
        let stem = args.out.join(format!("fold{}", f.fold));
        save_checkpoint(&f.training.trained, &stem)?;
        if !f.training.head_weights.is_empty() {
            write_head_weights_csv(args.out.join(format!("head_weights_fold{}.csv", f.fold)), &f.training.head_weights)?;
        }
        if args.embeddings {
            let out = f.training.trained.outputs(&data, &f.test_idx)?;
            let ids: Vec<String> = f.test_idx.iter().map(|&i| data.ids[i].clone()).collect();
            let labels: Vec<_> = f.test_idx.iter().map(|&i| data.labels[i]).collect();
            write_embeddings_csv(args.out.join(format!("embeddings_fold{}.csv", f.fold)), &ids, &labels, &out.penultimate)?;
        }
    }
    outcome.report.write(args.out.join("report.json"))?;
    let table = outcome.report.render_table();
    fs::write(args.out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn report(args: ReportArgs) -> Result<()> {
    let report = EvalReport::read(&args.report).with_context(|| format!("loading {}", args.report.display()))?;
    print!("{}", report.render_table());
    Ok(())
}

pub fn export_embeddings(args: ExportArgs) -> Result<()> {
    let trained = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let data = load_dataset(&args.a, args.b.as_deref())?;
    let all: Vec<usize> = (0..data.len()).collect();
    let out = trained.outputs(&data, &all)?;
    write_embeddings_csv(&args.out, &data.ids, &data.labels, &out.penultimate)?;
    println!(
        "wrote {} embeddings of width {} to {}",
        data.len(),
        out.penultimate.first().map_or(0, Vec::len),
        args.out.display()
    );
    Ok(())
}
