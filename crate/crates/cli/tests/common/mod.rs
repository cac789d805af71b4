//! Synthetic gazetteer shared by the CLI test targets.
#![allow(dead_code)]

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toposearch::corpus::{record_to_json, Coordinate, ToponymRecord, ToponymSubtype, ToponymType};

const RUS_SYLLABLES: [&str; 24] = [
    "ка", "ба", "ша", "ми", "ло", "ру", "та", "не", "зи", "во", "гу", "ря", "ле", "со", "ду", "пи", "ма", "ки", "лу",
    "ны", "ро", "зе", "че", "жа",
];
const TAT_SYLLABLES: [&str; 16] = [
    "әк", "өл", "үр", "ңа", "һы", "җи", "тау", "күл", "су", "ел", "кар", "бай", "йорт", "чиш", "кыр", "ман",
];
const OBJECTS: [&str; 7] = ["Село", "Деревня", "Река", "Озеро", "Урочище", "Родник", "Гора"];
const SIDES: [&str; 4] = ["северу", "югу", "востоку", "западу"];

/// Latitude and longitude bounds of the synthetic region: 3° by 6°.
pub const LAT_RANGE: (f64, f64) = (54.0, 57.0);
pub const LON_RANGE: (f64, f64) = (47.0, 53.0);

fn word(rng: &mut ChaCha8Rng, syllables: &[&str], len: usize) -> String {
    let mut w: String = (0..len).map(|_| *syllables.choose(rng).unwrap()).collect();
    let first = w.remove(0);
    first.to_uppercase().collect::<String>() + &w
}

/// `n` records with unique Russian and Tatar names and uniform random
/// coordinates in the synthetic region. About one in ten records lacks its
/// Russian name and one in ten its Tatar name; optional fields vary.
pub fn synthetic_records(n: usize, seed: u64) -> Vec<ToponymRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = HashSet::new();
    let mut unique = |rng: &mut ChaCha8Rng, syllables: &[&str]| loop {
        let w = word(rng, syllables, 4);
        if used.insert(w.clone()) {
            return w;
        }
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let rus = unique(&mut rng, &RUS_SYLLABLES);
        let tat = unique(&mut rng, &TAT_SYLLABLES);
        let (name_rus, name_tat) = match rng.gen_range(0..10) {
            0 => (String::new(), tat),
            1 => (rus, String::new()),
            _ => (rus, tat),
        };
        let mut rec = ToponymRecord::named(format!("{}", 1000 + i), name_rus);
        rec.name_tat = name_tat;
        let object = *OBJECTS.choose(&mut rng).unwrap();
        rec.geographical_object = object.into();
        rec.toponym_type = Some(if rng.gen_bool(0.7) {
            ToponymType::Toponym
        } else {
            ToponymType::Microtoponym
        });
        rec.toponym_subtype = match object {
            "Село" | "Деревня" => ToponymSubtype::Oikonym,
            "Река" | "Озеро" | "Родник" => ToponymSubtype::Hydronym,
            "Гора" => ToponymSubtype::Oronym,
            _ => ToponymSubtype::None,
        };
        if rng.gen_bool(0.8) {
            rec.federal_subject = "Республика Татарстан".into();
        }
        if rng.gen_bool(0.9) {
            rec.geographical_location = format!(
                "Расположено в {} км к {} от с. {}",
                rng.gen_range(2..60),
                SIDES.choose(&mut rng).unwrap(),
                word(&mut rng, &RUS_SYLLABLES, 3)
            );
        }
        if rng.gen_bool(0.6) {
            rec.etymology = format!(
                "От татарского «{}» и слова «{}».",
                word(&mut rng, &TAT_SYLLABLES, 2),
                word(&mut rng, &TAT_SYLLABLES, 2).to_lowercase()
            );
        }
        if rng.gen_bool(0.4) {
            rec.physio_details = format!(
                "Длина {} км, площадь водосбора {} кв. км.",
                rng.gen_range(1..90),
                rng.gen_range(10..900)
            );
        }
        if rng.gen_bool(0.5) {
            rec.sources = format!(
                "Татарская энциклопедия. Казан, {}, {} бит",
                rng.gen_range(1990..2020),
                rng.gen_range(10..700)
            );
        }
        let lat = rng.gen_range(LAT_RANGE.0..LAT_RANGE.1);
        let lon = rng.gen_range(LON_RANGE.0..LON_RANGE.1);
        rec.latitude = Coordinate::new(format!("{lat:.6}"));
        rec.longitude = Coordinate::new(format!("{lon:.6}"));
        rec.has_map = true;
        out.push(rec);
    }
    out
}

pub fn write_jsonl(path: &Path, records: &[ToponymRecord]) {
    let mut f = std::fs::File::create(path).unwrap();
    for r in records {
        writeln!(f, "{}", record_to_json(r).unwrap()).unwrap();
    }
}

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_toposearch"));
    cmd.env_remove("RUST_LOG");
    cmd
}

/// Runs the CLI and returns its output; panics with stderr when it could
/// not be spawned.
pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn toposearch")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
