//! Every quoted LLM answer in the reference corpus parses to the stated
//! items and fields.

use blendkit_core::llm::{parse_direct_association, parse_enumerated_list, EntityKind};

const SWIMMING: &str = "1) swimmers diving into a pool 2) swimmers doing laps in a pool 3) swimmers competing in a swimming race 4) swimmers playing in the water 5) swimmers enjoying the water on a hot day";
const RACING: &str = "1) swimmers in the starting blocks, poised and ready to begin 2) swimmers striving to maintain their speed and stay ahead of their competitors 3) swimmers crossing the finish line and celebrating their victory";
const BEER: &str = "\"a guy walks into a bar and orders a beer\", \"a group of friends are sitting around a table drinking beer and chatting\", \"a couple is sharing a beer while watching a sunset\", \"a guy is drinking a beer while watching a football game on TV\", \"a group of people are having a beer tasting party\"";

#[test]
fn chewbacca_adjectives() {
    let p = parse_enumerated_list("brave, loyal, gentle, hairy, heroic", 5).unwrap();
    assert_eq!(p.items, ["brave", "loyal", "gentle", "hairy", "heroic"]);
}

#[test]
fn darth_vader_association() {
    let raw = "I associate swimming with Darth Vader because of his ability to use the Force to control the movements.";
    let a = parse_direct_association(raw, "swimming", EntityKind::Character).unwrap();
    assert_eq!(a.entity, "Darth Vader");
    assert_eq!(a.reason, "his ability to use the Force to control the movements");
    assert_eq!(a.entity_kind, EntityKind::Character);
}

#[test]
fn jabba_association() {
    let raw = "I associate boxing with Jabba the Hutt's palace because of its underground fighting ring.";
    let a = parse_direct_association(raw, "boxing", EntityKind::Location).unwrap();
    assert_eq!(a.entity, "Jabba the Hutt's palace");
    assert_eq!(a.reason, "its underground fighting ring");
}

#[test]
fn swimming_scene_list() {
    let p = parse_enumerated_list(SWIMMING, 5).unwrap();
    assert_eq!(
        p.items,
        [
            "swimmers diving into a pool",
            "swimmers doing laps in a pool",
            "swimmers competing in a swimming race",
            "swimmers playing in the water",
            "swimmers enjoying the water on a hot day",
        ]
    );
}

#[test]
fn racing_scene_list_keeps_inner_commas() {
    let p = parse_enumerated_list(RACING, 3).unwrap();
    assert_eq!(
        p.items,
        [
            "swimmers in the starting blocks, poised and ready to begin",
            "swimmers striving to maintain their speed and stay ahead of their competitors",
            "swimmers crossing the finish line and celebrating their victory",
        ]
    );
}

#[test]
fn beer_scene_list() {
    let p = parse_enumerated_list(BEER, 5).unwrap();
    assert_eq!(p.items.len(), 5);
    assert_eq!(p.items[0], "a guy walks into a bar and orders a beer");
    assert_eq!(p.items[3], "a guy is drinking a beer while watching a football game on TV");
    assert_eq!(p.items[4], "a group of people are having a beer tasting party");
}

#[test]
fn beer_scenes_one_per_line() {
    let raw = BEER.replace("\", \"", "\"\n\"");
    let p = parse_enumerated_list(&raw, 5).unwrap();
    assert_eq!(p.items.len(), 5);
    assert_eq!(p.items[1], "a group of friends are sitting around a table drinking beer and chatting");
}

#[test]
fn authored_association_answers() {
    let a = parse_direct_association(
        "I would associate shampoo with C-3PO because of his shiny exterior.",
        "shampoo",
        EntityKind::Character,
    )
    .unwrap();
    assert_eq!((a.entity.as_str(), a.reason.as_str()), ("C-3PO", "his shiny exterior"));
    let a = parse_direct_association(
        "I would associate toothbrush with a lightsaber because of the long and thin handle.",
        "toothbrush",
        EntityKind::Object,
    )
    .unwrap();
    assert_eq!(a.reason, "the long and thin handle");
}
