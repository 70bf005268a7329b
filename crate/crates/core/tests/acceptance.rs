//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints one PASS or FAIL line even when output capture is on.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use image::Rgb;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use visionsim::experiment::{
    create_session, resolve_order, Controller, OrderMode, Protocol, SceneEntry,
};
use visionsim::gaze::{read_gaze, EyeSample, GazeSample, GazeWriter};
use visionsim::optics::{
    autofocal_update, blur_ellipse, AutofocalConfig, FocusAlgorithm, FocusState, RefractionProfile,
};
use visionsim::optotype::{Orientation, SloanLetter};
use visionsim::questionnaire::{
    load_questionnaire, read_responses, record_responses, save_questionnaire, ResponseSet,
};
use visionsim::render::{apply_blur, BlurField, PixelBlur, Raster};
use visionsim::task::{
    generate_trial, ground_truth, run_block, BlockConfig, ColumnTable, FocusCondition, SceneLayout,
    TaskConfig, Trial,
};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo")
}

fn blur_physics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let eye = RefractionProfile::new(
            rng.random_range(-6.0..6.0),
            rng.random_range(0.0..3.0),
            rng.random_range(0.0..180.0),
            rng.random_range(0.0..2.0),
        )
        .map_err(|e| e.to_string())?;
        let lens = rng.random_range(-2.0..5.0);
        let vergence = rng.random_range(0.0..4.0);
        let p1 = rng.random_range(2.0..4.0);
        let k = rng.random_range(1.0..2.0);
        let a = blur_ellipse(&eye, lens, vergence, p1).map_err(|e| e.to_string())?;
        let b = blur_ellipse(&eye, lens, vergence, k * p1).map_err(|e| e.to_string())?;
        for (x, y) in [(a.major, b.major), (a.minor, b.minor)] {
            let err = (y - k * x).abs() / (k * x).max(1e-12);
            if k * x > 1e-9 {
                worst = worst.max(err);
            }
            ensure(err < 1e-9 || (k * x).abs() < 1e-9, || {
                format!("point {i}: not linear in pupil")
            })?;
        }

        // zero at focus: a spherical eye tuned to the object vergence
        let sph = RefractionProfile::new(eye.sphere, 0.0, 0.0, eye.residual_accommodation)
            .map_err(|e| e.to_string())?;
        let tuned = vergence - sph.sphere - sph.residual_accommodation;
        let z = blur_ellipse(&sph, tuned, vergence, p1).map_err(|e| e.to_string())?;
        ensure(z.major < 1e-9, || {
            format!("point {i}: blur {} at focus", z.major)
        })?;
    }

    // 4 mm pupil, 1 D defocus: 0.004 rad expressed in arcminutes
    let expected = 0.004 * (180.0 / PI) * 60.0;
    let spot =
        blur_ellipse(&RefractionProfile::default(), 0.0, 1.0, 4.0).map_err(|e| e.to_string())?;
    ensure(
        rel_close(spot.major, expected, 1e-6) && rel_close(spot.major, 13.751, 1e-4),
        || format!("spot check {} vs {expected}", spot.major),
    )?;
    Ok(format!(
        "1000 points, worst linearity error {worst:.1e}, spot {:.4} arcmin",
        spot.major
    ))
}

fn random_image(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Raster {
    Raster::from_fn(w, h, |_, _| {
        Rgb([
            rng.random::<f32>(),
            rng.random::<f32>(),
            rng.random::<f32>(),
        ])
    })
}

fn channel_mean(img: &Raster, margin: u32) -> [f64; 3] {
    let mut sum = [0.0f64; 3];
    let mut n = 0.0;
    for y in margin..img.height() - margin {
        for x in margin..img.width() - margin {
            let p = img.get_pixel(x, y);
            for c in 0..3 {
                sum[c] += p[c] as f64;
            }
            n += 1.0;
        }
    }
    sum.map(|s| s / n)
}

fn renderer() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 512u32;
    let img = random_image(&mut rng, n, n);

    let same =
        apply_blur(&img, &BlurField::zero(n as usize, n as usize)).map_err(|e| e.to_string())?;
    ensure(same == img, || "zero field changed the image".into())?;

    let flat = Raster::from_pixel(n, n, Rgb([0.25, 0.5, 0.75]));
    let cells: Vec<PixelBlur> = (0..n * n)
        .map(|_| PixelBlur {
            major_px: rng.random_range(0.0..30.0),
            minor_px: rng.random_range(0.0..10.0),
            orientation: rng.random_range(0.0..180.0),
        })
        .map(|b| PixelBlur {
            minor_px: b.minor_px.min(b.major_px),
            ..b
        })
        .collect();
    let field = BlurField::from_cells(n as usize, n as usize, cells);
    let out = apply_blur(&flat, &field).map_err(|e| e.to_string())?;
    ensure(out == flat, || "flat field not preserved exactly".into())?;

    let max_radius = 16;
    let blurred = apply_blur(&img, &field).map_err(|e| e.to_string())?;
    let (before, after) = (
        channel_mean(&img, max_radius),
        channel_mean(&blurred, max_radius),
    );
    let mut worst = 0.0f64;
    for c in 0..3 {
        let rel = (after[c] - before[c]).abs() / before[c];
        worst = worst.max(rel);
    }
    ensure(worst < 0.01, || {
        format!("interior mean off by {:.3}%", worst * 100.0)
    })?;
    Ok(format!(
        "512x512, identity and flat field exact, interior mean within {:.4}%",
        worst * 100.0
    ))
}

fn controllers() -> Check {
    let (from, to) = (0.1667, 3.3333);
    let expected = (to - from) / 10.0;
    let slew = AutofocalConfig::with_algorithm(FocusAlgorithm::SlewLimited);
    let mut reached = Vec::new();
    for dt in [0.001, 0.01, 1.0 / 90.0, 0.05] {
        let mut state = FocusState::new(from, 4.0).map_err(|e| e.to_string())?;
        let mut t = 0.0;
        while state.lens_power != to {
            let prev = state.lens_power;
            state = autofocal_update(&slew, state, to, dt).map_err(|e| e.to_string())?;
            t += dt;
            ensure((state.lens_power - prev).abs() <= 10.0 * dt + 1e-12, || {
                format!("dt {dt}: step too large")
            })?;
            ensure(t < 2.0, || format!("dt {dt}: never reached the target"))?;
        }
        ensure((t - expected).abs() <= dt + 1e-12, || {
            format!("dt {dt}: reached at {t} s, expected {expected}")
        })?;
        reached.push(format!("{t:.4}"));
    }

    let lp = AutofocalConfig::with_algorithm(FocusAlgorithm::LowPass);
    let tau = lp.time_constant;
    let dt = 1.0 / 90.0;
    let mut state = FocusState::new(from, 4.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for step in 1..=300 {
        state = autofocal_update(&lp, state, to, dt).map_err(|e| e.to_string())?;
        let t = step as f64 * dt;
        let closed = to + (from - to) * (-t / tau).exp();
        worst = worst.max((state.lens_power - closed).abs());
    }
    ensure(worst < 1e-9, || {
        format!("low-pass off closed form by {worst:e}")
    })?;
    Ok(format!(
        "slew reaches target at {} s (expected {expected:.4}), low-pass error {worst:.1e}",
        reached.join("/")
    ))
}

fn trial_with(
    table: ColumnTable,
    orientation: Orientation,
    letter: SloanLetter,
    base: &Trial,
) -> Trial {
    Trial {
        table,
        landolt_orientation: orientation,
        sloan_letter: letter,
        ..base.clone()
    }
}

fn matching_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let layout = SceneLayout::default();
    let config = TaskConfig::default();
    let base = generate_trial(&mut rng, 0, &layout, &config).map_err(|e| e.to_string())?;

    let mut tables = vec![ColumnTable::new(SloanLetter::ALL).map_err(|e| e.to_string())?];
    for _ in 0..999 {
        let mut letters = SloanLetter::ALL;
        letters.shuffle(&mut rng);
        tables.push(ColumnTable::new(letters).map_err(|e| e.to_string())?);
    }
    for table in &tables {
        // oracle: the table as printed, read column by column
        let printed: Vec<char> = table.to_string().chars().collect();
        let mut matches = 0;
        for orientation in Orientation::all() {
            for letter in SloanLetter::ALL {
                let oracle = printed[orientation.degrees() as usize / 45] == letter.as_char();
                let truth = ground_truth(&trial_with(*table, orientation, letter, &base));
                ensure(oracle == truth, || {
                    format!("table {table}: disagreement at {orientation:?} {letter:?}")
                })?;
                matches += truth as usize;
            }
        }
        ensure(matches == 8, || format!("table {table}: {matches} matches"))?;
    }

    let n = 10_000;
    let mut hits = 0;
    for id in 0..n {
        let t = generate_trial(&mut rng, id, &layout, &config).map_err(|e| e.to_string())?;
        ensure(t.is_match == ground_truth(&t), || {
            format!("trial {id}: label disagrees")
        })?;
        ensure(
            [t.table_screen, t.landolt_screen, t.sloan_screen]
                .iter()
                .collect::<std::collections::BTreeSet<_>>()
                .len()
                == 3,
            || format!("trial {id}: screens not distinct"),
        )?;
        hits += t.is_match as usize;
    }
    let rate = hits as f64 / n as f64;
    ensure((rate - 0.5).abs() <= 0.02, || format!("match rate {rate}"))?;
    Ok(format!(
        "{} tables x 64 pairs agree, 8 matches each; match rate {rate:.4}",
        tables.len()
    ))
}

fn end_to_end() -> Check {
    let base = BlockConfig {
        n_trials: 1000,
        seed: 7,
        pupil_mm: 4.0,
        task: TaskConfig {
            optotype_gap: 2.0,
            ..TaskConfig::default()
        },
        ..BlockConfig::default()
    };
    let run = |focus: FocusCondition| -> Result<f64, String> {
        run_block(&BlockConfig {
            focus,
            ..base.clone()
        })
        .map(|r| r.proportion_correct)
        .map_err(|e| e.to_string())
    };
    let instant = run(FocusCondition::Autofocal(AutofocalConfig::with_algorithm(
        FocusAlgorithm::Instant,
    )))?;
    let fixed = run(FocusCondition::Fixed { power: 1.0 })?;
    ensure(instant >= 0.90, || format!("instant autofocal {instant}"))?;
    ensure(instant - fixed >= 0.15, || {
        format!("fixed 1 m {fixed} vs instant {instant}")
    })?;

    // multiplier m blurs every screen by m times the optotype gap
    let mut levels = Vec::new();
    for m in [0.0, 1.0, 2.0, 4.0] {
        levels.push(run(FocusCondition::UniformBlur { arcmin: m * 2.0 })?);
    }
    for w in levels.windows(2) {
        ensure(w[1] <= w[0] + 0.02, || {
            format!("uniform blur not monotone: {levels:?}")
        })?;
    }
    Ok(format!(
        "instant {instant:.3}, fixed 1 m {fixed:.3}, uniform blur x0/1/2/4 {}",
        levels
            .iter()
            .map(|p| format!("{p:.3}"))
            .collect::<Vec<_>>()
            .join("/")
    ))
}

fn gaze_round_trip() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut t = 0u64;
    let samples: Vec<GazeSample> = (0..200)
        .map(|i| {
            t += rng.random_range(1..20_000_000);
            let target = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.3..6.0),
            ];
            let mut eye =
                |x: f64| EyeSample::toward([x, 0.0, 0.0], target, rng.random_range(2.0..7.0));
            GazeSample {
                timestamp_ns: t,
                left: eye(-0.032),
                right: if i % 7 == 0 {
                    EyeSample::INVALID
                } else {
                    eye(0.032)
                },
                combined: eye(0.0),
                vendor_extras: if i % 3 == 0 {
                    format!("frame={i};note=\"a,b\"")
                } else {
                    String::new()
                },
            }
        })
        .collect();
    let mut writer = GazeWriter::new(Vec::new()).map_err(|e| e.to_string())?;
    for s in &samples {
        writer.write(s).map_err(|e| e.to_string())?;
    }
    let bytes = writer.finish().map_err(|e| e.to_string())?;
    let back = read_gaze(bytes.as_slice()).map_err(|e| e.to_string())?;
    ensure(back == samples, || {
        "gaze.csv round trip changed samples".into()
    })
}

fn persistence() -> Check {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut dirs = Vec::new();
    for _ in 0..3 {
        let s = create_session("S01", BTreeMap::new(), root.path()).map_err(|e| e.to_string())?;
        dirs.push(
            s.session_dir
                .file_name()
                .unwrap()
                .to_string_lossy()
                .into_owned(),
        );
    }
    ensure(dirs == ["S01", "S01_1", "S01_2"], || {
        format!("session folders {dirs:?}")
    })?;

    let protocol = |seed| Protocol {
        name: "shuffled".into(),
        order_mode: OrderMode::Shuffled,
        seed,
        scenes: (0..8)
            .map(|i| SceneEntry::new(format!("scene{i}"), ""))
            .collect(),
    };
    let mut distinct = std::collections::BTreeSet::new();
    for seed in 0..20 {
        let a = resolve_order(&protocol(seed));
        let b = Controller::new(protocol(seed))
            .map_err(|e| e.to_string())?
            .order()
            .to_vec();
        let mut sorted = a.clone();
        sorted.sort();
        ensure(a == b && sorted == (0..8).collect::<Vec<_>>(), || {
            format!("seed {seed}: order {a:?} vs {b:?}")
        })?;
        distinct.insert(a);
    }
    ensure(distinct.len() > 1, || {
        "every seed gave the same order".into()
    })?;

    gaze_round_trip()?;

    let qdir = demo_dir().join("questionnaires");
    let tlx = load_questionnaire("TLX", &qdir).map_err(|e| e.to_string())?;
    let copy_dir = root.path().join("q");
    std::fs::create_dir(&copy_dir).map_err(|e| e.to_string())?;
    save_questionnaire(&tlx, &copy_dir).map_err(|e| e.to_string())?;
    ensure(
        load_questionnaire("TLX", &copy_dir).map_err(|e| e.to_string())? == tlx,
        || "questionnaire round trip changed it".into(),
    )?;
    let session = create_session("Q", BTreeMap::new(), root.path()).map_err(|e| e.to_string())?;
    let responses = ResponseSet {
        questionnaire: "TLX".into(),
        scene_name: "questionnaire_1".into(),
        answers: tlx.auto_answers(&mut ChaCha8Rng::seed_from_u64(9)),
        completed_at: chrono::Utc::now(),
    };
    let path = record_responses(&responses, &tlx, &session).map_err(|e| e.to_string())?;
    ensure(
        read_responses(&path).map_err(|e| e.to_string())? == responses,
        || "responses round trip changed them".into(),
    )?;

    let data = root.path().join("data");
    let out = Command::new(env!("CARGO_BIN_EXE_visionsim"))
        .arg("run")
        .arg("--protocol")
        .arg(demo_dir().join("protocol.json"))
        .args(["--subject", "P01", "--demographic", "age=30", "--mask"])
        .arg(demo_dir().join("mask.json"))
        .arg("--data-root")
        .arg(&data)
        .env_remove("VISIONSIM_DEVICES")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("demo run failed: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    let session = data.join("P01");
    let layout: [(&str, &[&str]); 5] = [
        (".", &["session.json"]),
        ("main_menu_1", &["menu.json", "gaze.csv"]),
        ("baseline_1", &["trials.csv", "gaze.csv", "summary.json"]),
        (
            "matching_task_1",
            &["trials.csv", "gaze.csv", "summary.json"],
        ),
        ("questionnaire_1", &["responses_TLX.json", "gaze.csv"]),
    ];
    for (dir, files) in layout {
        for f in files {
            let p = session.join(dir).join(f);
            ensure(p.is_file(), || format!("missing {}", p.display()))?;
        }
    }
    Ok("3 suffixed sessions, shuffled order reproducible, gaze and questionnaire round trips, demo layout".into())
}

fn no_secondary_component() -> Check {
    let workspace = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let manifest =
        std::fs::read_to_string(workspace.join("Cargo.toml")).map_err(|e| e.to_string())?;
    let crates: Vec<String> = std::fs::read_dir(workspace.join("crates"))
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    let own = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("Cargo.toml"))
        .map_err(|e| e.to_string())?;
    ensure(crates == ["core"], || {
        format!("workspace crates {crates:?}")
    })?;
    ensure(
        !manifest.contains("webui") && !own.contains("webui"),
        || "a web UI crate is referenced".into(),
    )?;
    Ok("workspace builds the core crate only".into())
}

fn main() -> ExitCode {
    // `cargo test -- <filter>` passes arguments; the suite always runs whole
    let criteria: [(&str, fn() -> Check, Duration); 7] = [
        ("blur physics", blur_physics, Duration::from_secs(1)),
        (
            "renderer identity and conservation",
            renderer,
            Duration::from_secs(10),
        ),
        ("autofocal controllers", controllers, Duration::from_secs(1)),
        (
            "matching-task oracle",
            matching_oracle,
            Duration::from_secs(5),
        ),
        (
            "end-to-end simulated experiment",
            end_to_end,
            Duration::from_secs(60),
        ),
        (
            "persistence and protocol",
            persistence,
            Duration::from_secs(10),
        ),
        (
            "no secondary component",
            no_secondary_component,
            Duration::from_secs(1),
        ),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= limit {
                Ok(detail)
            } else {
                Err(format!("took {elapsed:.2?}, limit {limit:?}"))
            }
        });
        match result {
            Ok(detail) => println!("PASS {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
