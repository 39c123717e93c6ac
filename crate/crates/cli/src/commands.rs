use std::fs;
use std::io::Write;
use std::path::Path;

use dcnn::data::scan_class_tree;
use dcnn::pgm::{decode_image, write_pgm};
use dcnn::preprocess::{preprocess_auto, preprocess_bytes, verify_processed};
use dcnn::train::train_with_progress;
use dcnn::{
    assemble_reference_model, evaluate, load_dataset, load_model, log_to_csv, save_model, split_dataset, EvalReport,
    LoadReport, Model32,
};
use serde::Serialize;

use crate::{CliError, EvalArgs, InspectArgs, PredictArgs, PreprocessArgs, ResolvedTrain, Subset, TrainArgs};

fn echo_config(err: &mut dyn Write, config: &impl Serialize) -> Result<(), CliError> {
    let json = serde_json::to_string(config).map_err(|e| CliError::Failed(e.to_string()))?;
    writeln!(err, "config: {json}")?;
    Ok(())
}

fn report_skipped(err: &mut dyn Write, report: &LoadReport) -> Result<(), CliError> {
    for s in &report.skipped {
        writeln!(err, "skipped {}: {}", s.path.display(), s.reason)?;
    }
    Ok(())
}

/// Writes an evaluation summary, with the confusion matrix when class
/// names are given.
pub fn write_report(
    out: &mut dyn Write,
    report: &EvalReport,
    confusion_names: Option<&[String]>,
) -> std::io::Result<()> {
    writeln!(out, "examples: {}", report.confusion.total())?;
    writeln!(out, "loss: {:.6}", report.loss)?;
    writeln!(out, "accuracy: {:.6}", report.accuracy)?;
    writeln!(out, "macro_precision: {:.6}", report.macro_precision)?;
    writeln!(out, "macro_recall: {:.6}", report.macro_recall)?;
    if let Some(names) = confusion_names {
        let width = names.iter().map(String::len).max().unwrap_or(0).max(4);
        writeln!(out, "confusion (rows: true class, columns: predicted class index)")?;
        write!(out, "{:width$}", "")?;
        for k in 0..names.len() {
            write!(out, " {k:>5}")?;
        }
        writeln!(out)?;
        for (k, name) in names.iter().enumerate() {
            write!(out, "{name:width$}")?;
            for n in report.confusion.row(k) {
                write!(out, " {n:>5}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn train(args: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let resolved = ResolvedTrain::resolve(args)?;
    echo_config(err, &resolved)?;

    let dataset = load_dataset::<f32>(&resolved.data, resolved.already_processed)?;
    report_skipped(err, &dataset.report)?;
    let split = split_dataset(
        dataset.examples,
        dataset.class_names,
        resolved.split,
        resolved.train.seed,
        true,
    )?;
    writeln!(
        err,
        "{} classes, {} training and {} test images",
        split.class_names.len(),
        split.train.len(),
        split.test.len()
    )?;

    let model = Model32::from_architecture(&resolved.architecture, split.class_names.clone(), resolved.train.seed)?;
    let epochs = resolved.train.epochs;
    let mut progress = Ok(());
    let (model, log) = train_with_progress(model, &split.train, &split.test, &resolved.train, |r| {
        if progress.is_ok() {
            progress = writeln!(
                err,
                "epoch {}/{epochs}: train loss {:.4} acc {:.4}, test loss {:.4} acc {:.4}",
                r.epoch, r.train_loss, r.train_acc, r.test_loss, r.test_acc
            );
        }
    })?;
    progress?;

    save_model(&model, &resolved.out)?;
    if let Some(path) = &resolved.log {
        fs::write(path, log_to_csv(&log))?;
    }
    writeln!(out, "test split")?;
    write_report(out, &evaluate(&model, &split.test)?, None)?;
    Ok(())
}

pub fn eval(args: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    echo_config(err, args)?;
    let model: Model32 = load_model(&args.model)?;
    let dataset = load_dataset::<f32>(&args.data, args.already_processed)?;
    report_skipped(err, &dataset.report)?;
    if dataset.class_names.len() != model.class_count() {
        return Err(CliError::Failed(format!(
            "class count mismatch: model has {} classes, {} has {}",
            model.class_count(),
            args.data.display(),
            dataset.class_names.len()
        )));
    }
    if dataset.class_names != model.class_names() {
        writeln!(
            err,
            "warning: class directory names differ from the model's class names"
        )?;
    }
    let examples = match args.subset {
        Subset::All => dataset.examples,
        side => {
            let split = split_dataset(dataset.examples, dataset.class_names, args.split, args.seed, true)?;
            if side == Subset::Train {
                split.train
            } else {
                split.test
            }
        }
    };
    let report = evaluate(&model, &examples)?;
    write_report(out, &report, args.confusion.then_some(model.class_names()))?;
    Ok(())
}

pub fn predict(args: &PredictArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    echo_config(err, args)?;
    let model: Model32 = load_model(&args.model)?;
    let bytes =
        fs::read(&args.image).map_err(|e| CliError::Failed(format!("cannot read {}: {e}", args.image.display())))?;
    let image = decode_image(&bytes)?;
    let probs = model.forward(&preprocess_auto::<f32>(&image, args.threshold)?)?;

    let mut ranked: Vec<(usize, f32)> = probs.data().iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let k = usize::try_from(args.top).unwrap_or(usize::MAX).min(ranked.len());
    for &(class, p) in &ranked[..k] {
        writeln!(out, "{}\t{p:.9}", model.class_names()[class])?;
    }
    Ok(())
}

pub fn inspect(args: &InspectArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    echo_config(err, args)?;
    let model: Model32 = match &args.model {
        Some(path) => load_model(path)?,
        None => assemble_reference_model(0),
    };
    writeln!(out, "{:<8} {:>14} {:>8}", "layer", "output shape", "params")?;
    writeln!(out, "{:<8} {:>14} {:>8}", "input", model.input_shape().to_string(), 0)?;
    for row in model.summary() {
        writeln!(
            out,
            "{:<8} {:>14} {:>8}",
            row.name,
            row.output_shape.to_string(),
            row.params
        )?;
    }
    writeln!(out, "total parameters: {}", model.param_count())?;
    if model.stored_scalars() != model.param_count() {
        writeln!(out, "stored scalars: {}", model.stored_scalars())?;
    }
    Ok(())
}

pub fn preprocess(args: &PreprocessArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    echo_config(err, args)?;
    let classes = scan_class_tree(&args.input)?;
    let total: usize = classes.iter().map(|(_, files)| files.len()).sum();
    if total == 0 {
        return Err(CliError::Failed(format!(
            "{} contains no image files",
            args.input.display()
        )));
    }
    let mut failed = 0;
    let mut flagged = 0;
    for (class, files) in &classes {
        for path in files {
            let result = if args.verify {
                verify_file(path, args.threshold).map(|violations| {
                    if !violations.is_empty() {
                        flagged += 1;
                        Some(format!("{}: {}", path.display(), violations.join("; ")))
                    } else {
                        None
                    }
                })
            } else {
                let root = args.out.as_deref().expect("clap requires --out without --verify");
                convert_file(path, &root.join(class), args.threshold).map(|()| None)
            };
            match result {
                Ok(Some(line)) => writeln!(out, "{line}")?,
                Ok(None) => {}
                Err(e) => {
                    failed += 1;
                    writeln!(err, "skipped {}: {e}", path.display())?;
                }
            }
        }
    }
    if args.verify {
        writeln!(
            out,
            "checked {total} files: {flagged} with violations, {failed} unreadable"
        )?;
    } else {
        writeln!(out, "wrote {} images, skipped {failed}", total - failed)?;
    }
    if args.strict && failed + flagged > 0 {
        return Err(CliError::Failed(format!(
            "{} of {total} files failed",
            failed + flagged
        )));
    }
    Ok(())
}

fn verify_file(path: &Path, threshold: u8) -> dcnn::Result<Vec<String>> {
    let image = decode_image(&fs::read(path)?)?;
    Ok(verify_processed(&image, threshold)
        .iter()
        .map(ToString::to_string)
        .collect())
}

fn convert_file(path: &Path, out_dir: &Path, threshold: u8) -> dcnn::Result<()> {
    let processed = preprocess_bytes(&decode_image(&fs::read(path)?)?, false, threshold)?;
    fs::create_dir_all(out_dir)?;
    let stem = path.file_stem().unwrap_or(path.as_os_str());
    write_pgm(&out_dir.join(stem).with_extension("pgm"), &processed)
}
