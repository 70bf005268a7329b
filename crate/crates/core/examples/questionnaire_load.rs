//! Loads the bundled TLX questionnaire, checks a complete and an incomplete
//! answer set, and records the complete one.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::Utc;
use visionsim::experiment::create_session;
use visionsim::questionnaire::{
    load_questionnaire, read_responses, record_responses, Answer, ResponseSet,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo/questionnaires");
    let q = load_questionnaire("TLX", &dir)?;
    println!("{} ({} items)", q.title, q.items.len());

    let mut answers: BTreeMap<String, Answer> = BTreeMap::new();
    answers.insert("mental".into(), Answer::Integer(14));
    if let Err(e) = q.check_answers(&answers) {
        println!("partial set rejected: {e}");
    }
    for item in &q.items {
        answers.entry(item.id.clone()).or_insert(Answer::Integer(7));
    }
    q.check_answers(&answers)?;

    let root = std::env::temp_dir().join(format!("visionsim_q_{}", std::process::id()));
    let session = create_session("Q01", Default::default(), &root)?;
    let set = ResponseSet {
        questionnaire: q.abbreviation.clone(),
        scene_name: "questionnaire_1".into(),
        answers,
        completed_at: Utc::now(),
    };
    let path = record_responses(&set, &q, &session)?;
    assert_eq!(read_responses(&path)?.answers, set.answers);
    println!("wrote {}", path.display());
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
