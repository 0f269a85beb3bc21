//! Hand transcription of the bundled example replies, checked field by field.

use unite_core::metrics::{graph_summary, sir_graph};
use unite_core::model::StrategyKind;
use unite_core::translate::{parse_output, ParsedOutput};

use super::reply_fixture;

fn parse(k: StrategyKind, n: usize) -> Result<ParsedOutput, String> {
    parse_output(k, &reply_fixture(k, n)).map_err(|e| format!("{}_{n}: {e}", k.slug()))
}

fn check(cond: bool, what: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.to_string())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

pub fn list_of_objects() -> Result<(), String> {
    let ParsedOutput::ObjectList(a) = parse(StrategyKind::ListOfObjects, 1)? else {
        return Err("list 1: wrong variant".into());
    };
    check(a.len() == 9, "list 1 has 9 items")?;
    check(a.items()[0] == "Car exhaust pipe", "list 1 first item")?;
    check(a.items()[8] == "Road reflection", "list 1 last item")?;
    let ParsedOutput::ObjectList(b) = parse(StrategyKind::ListOfObjects, 2)? else {
        return Err("list 2: wrong variant".into());
    };
    check(b.len() == 15, "list 2 has 15 items")?;
    check(b.items()[3] == "sign reading \"Glove World\"", "quoted item kept whole")?;
    check(b.items()[14] == "red and white striped tent/awning", "list 2 last item")
}

pub fn descriptions() -> Result<(), String> {
    for k in [StrategyKind::SimpleDescription, StrategyKind::StructuredDescription] {
        for n in [1, 2] {
            let d = match parse(k, n)? {
                ParsedOutput::SimpleDescription(d) | ParsedOutput::StructuredDescription(d) => d,
                _ => return Err(format!("{}_{n}: wrong variant", k.slug())),
            };
            check(d.strict, &format!("{}_{n} has exactly two sentences", k.slug()))?;
        }
    }
    let ParsedOutput::SimpleDescription(d) = parse(StrategyKind::SimpleDescription, 1)? else {
        unreachable!()
    };
    check(
        d.sentence1.ends_with("surrounded by other officials.") && d.sentence1.contains("then-U.S. Ambassador"),
        "abbreviation does not split the first sentence",
    )?;
    check(d.sentence2.starts_with("They appear"), "second sentence")
}

pub fn relational() -> Result<(), String> {
    let ParsedOutput::RelationalMapping(g) = parse(StrategyKind::RelationalMapping, 1)? else {
        return Err("relational 1: wrong variant".into());
    };
    check(g.objects.len() == 7 && g.relationships.len() == 6, "pet portrait: 7 objects, 6 relationships")?;
    let ids: Vec<&str> = g.objects.iter().map(|o| o.id.as_str()).collect();
    check(ids == ["1", "2", "3", "4", "5", "6", "7"], "pet portrait ids")?;
    check(g.objects[0].name == "chihuahua", "first object")?;
    check(
        g.relationships.iter().all(|r| (0.8..=1.0).contains(&r.confidence)),
        "pet portrait confidences in [0.8, 1]",
    )?;
    let s = graph_summary(&ParsedOutput::RelationalMapping(g)).unwrap();
    check(s.distinct_relation_count == 5, "five distinct relations")?;
    check(close(s.conf_e, 5.7 / 6.0), "mean edge confidence 0.95")?;
    check(close(s.edge_density, 6.0 / 42.0), "edge density 6/42")?;

    let ParsedOutput::RelationalMapping(g) = parse(StrategyKind::RelationalMapping, 2)? else {
        return Err("relational 2: wrong variant".into());
    };
    check(g.objects.len() == 7 && g.relationships.len() == 7, "fire scene: 7 objects, 7 relationships")?;
    check(g.objects[6].id == "7" && g.relationships[0].subject_id == "2", "integer ids canonicalized")?;
    check(
        g.relationships.iter().all(|r| (0.7..=1.0).contains(&r.confidence)),
        "fire scene confidences in [0.7, 1]",
    )
}

pub fn inconsistency() -> Result<(), String> {
    let ParsedOutput::InconsistencyDetection(r) = parse(StrategyKind::InconsistencyDetection, 1)? else {
        return Err("inconsistency 1: wrong variant".into());
    };
    let scores: Vec<f64> = r.blocks().iter().map(|b| b.score).collect();
    check(scores == [0.9, 0.5, 0.9, 0.9], "block scores 0.9/0.5/0.9/0.9")?;
    let counts: Vec<usize> = r.blocks().iter().map(|b| b.findings.len()).collect();
    check(counts == [0, 1, 0, 0], "one perspective finding")?;
    let f = &r.perspective.findings[0];
    check(f.confidence == 0.8, "finding confidence")?;
    check(f.affected_objects.as_deref() == Some(&["Figure".to_string()][..]), "affected objects")?;
    check(r.summary.manipulation_likelihood == 0.1, "likelihood 0.1")?;
    check(!r.metadata.jpeg_artifacts && !r.metadata.compression_inconsistencies, "metadata flags")?;

    let ParsedOutput::InconsistencyDetection(r) = parse(StrategyKind::InconsistencyDetection, 2)? else {
        return Err("inconsistency 2: wrong variant".into());
    };
    check(r.blocks().iter().all(|b| b.score == 0.95 && b.findings.is_empty()), "clean report")?;
    check(r.summary.manipulation_likelihood == 0.05, "likelihood 0.05")
}

pub fn scene_graph() -> Result<(), String> {
    let ParsedOutput::SceneGraph(d) = parse(StrategyKind::SceneGraph, 1)? else {
        return Err("scene 1: wrong variant".into());
    };
    check(d.scene_elements.len() == 3, "iguana: 3 elements")?;
    let rels: usize = d.scene_elements.iter().map(|e| e.relationships.len()).sum();
    check(rels == 4, "iguana: 4 relationships")?;
    check(d.primary_subject.typical_context && d.primary_subject.confidence == 0.95, "primary subject")?;
    check(d.dangling_relations().is_empty(), "no dangling targets")?;
    check(d.analysis_summary.key_observations.len() == 3, "three observations")?;
    let s = graph_summary(&ParsedOutput::SceneGraph(d)).unwrap();
    check(s.node_count == 4 && s.edge_count == 4 && s.distinct_relation_count == 4, "iguana summary counts")?;
    let want = (0.4 + 4.0 / 12.0 + 0.8 + (0.9475 + 0.925) / 2.0) / 4.0;
    check(close(sir_graph(&s), want), "iguana structural retention")?;

    let ParsedOutput::SceneGraph(d) = parse(StrategyKind::SceneGraph, 2)? else {
        return Err("scene 2: wrong variant".into());
    };
    check(d.scene_elements.len() == 7, "yard: 7 elements")?;
    let rels: usize = d.scene_elements.iter().map(|e| e.relationships.len()).sum();
    check(rels == 4, "yard: 4 relationships")?;
    check(d.scene_elements[1].relationships.is_empty(), "missing relationship list reads as empty")?;
    check(!d.primary_subject.typical_context, "atypical context")?;
    check(d.dangling_relations().is_empty(), "target names match case-insensitively")
}

pub fn all() -> Vec<(&'static str, Result<(), String>)> {
    vec![
        ("list of objects", list_of_objects()),
        ("descriptions", descriptions()),
        ("relational mapping", relational()),
        ("inconsistency detection", inconsistency()),
        ("scene graph", scene_graph()),
    ]
}
