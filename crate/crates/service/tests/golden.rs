//! Replays every scripted dialogue and compares it byte for byte with the
//! stored transcript. Run with `UPDATE_GOLDEN=1` to rewrite the transcripts.

use std::fs;

use advisor_service::golden::{exhibits, golden_path, load_scripts, replay, topic_switch_text};

#[test]
fn transcripts_match_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut failures = Vec::new();
    for script in load_scripts().unwrap() {
        let got = replay(&script).unwrap().transcript();
        let path = golden_path(&script);
        if update {
            fs::write(&path, &got).unwrap();
            continue;
        }
        match fs::read_to_string(&path) {
            Ok(want) if want == got => {}
            Ok(_) => failures.push(format!("{}: transcript differs (rerun with UPDATE_GOLDEN=1 and review the diff)", script.name)),
            Err(e) => failures.push(format!("{}: {e}", script.name)),
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn replays_are_deterministic() {
    for script in load_scripts().unwrap() {
        assert_eq!(replay(&script).unwrap().transcript(), replay(&script).unwrap().transcript(), "{}", script.name);
    }
}

#[test]
fn scripts_show_what_they_claim() {
    let switch = topic_switch_text();
    for script in load_scripts().unwrap() {
        let r = replay(&script).unwrap();
        for tag in &script.covers {
            assert!(exhibits(tag, &r.records, &switch), "{} does not exhibit {tag}\n{}", script.name, r.transcript());
        }
    }
}
