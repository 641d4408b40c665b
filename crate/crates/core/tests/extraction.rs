use msje_core::corpus::{generate_synthetic, tokenize, SyntheticConfig};
use msje_core::extractor::*;
use msje_core::tfidf::TfidfModel;

fn dictionary_phrases() -> Vec<String> {
    let s = generate_synthetic(&SyntheticConfig { n_pairs: 20, vocab_size: 60, ..Default::default() }).unwrap();
    let mut p = s.ingredients.clone();
    p.extend(["french fried onions", "tomato sauce", "salt", "baking potatoes", "olive oil"].map(String::from));
    p
}

#[test]
fn tagger_learns_planted_entities() {
    let phrases = dictionary_phrases();
    let train = synthetic_tagging_corpus(&phrases, 1000, 1);
    let held_out = synthetic_tagging_corpus(&phrases, 300, 2);
    let cfg = TaggerConfig { epochs: 20, ..Default::default() };
    let (model, history) = train_tagger(&train, &cfg).unwrap();
    assert!(history.last().unwrap() < &history[0]);
    let acc = token_accuracy(&model, &held_out).unwrap();
    assert!(acc >= 0.95, "held-out token accuracy {acc}");
    let line = tokenize("1/4 cup French fried onions");
    use BioLabel::*;
    assert_eq!(tag_line(&line, &model).unwrap(), vec![O, O, B, I, E]);
}

#[test]
fn adjudicator_separates_entities_from_boilerplate() {
    let s = generate_synthetic(&SyntheticConfig { n_pairs: 300, vocab_size: 60, seed: 3, ..Default::default() }).unwrap();
    let mut phrases = s.ingredients.clone();
    phrases.extend(["salt", "water", "olive oil", "sugar", "butter", "black pepper"].map(String::from));
    let dict = EntityDictionary::from_phrases(&phrases);
    let recipes = &s.dataset.recipes;
    let raw: Vec<Vec<String>> = recipes.iter().map(raw_document).collect();
    let tfidf = TfidfModel::fit(&raw).unwrap();
    let (tagger, _) = train_tagger(&synthetic_tagging_corpus(&phrases, 600, 0), &TaggerConfig::default()).unwrap();
    let train = phrase_examples(&recipes[..200], &dict, &tfidf);
    let test = phrase_examples(&recipes[200..], &dict, &tfidf);
    let model = train_adjudicator(&train, &tagger, &AdjudicatorConfig::default()).unwrap();
    let acc = adjudicator_accuracy(&model, &tagger, &test).unwrap();
    assert!(acc >= 0.9, "held-out adjudicator accuracy {acc}");
}

#[test]
fn recovery_only_adds_entities() {
    let s = generate_synthetic(&SyntheticConfig { n_pairs: 120, seed: 5, ..Default::default() }).unwrap();
    let dict = EntityDictionary::from_phrases(&s.ingredients);
    let recipes = &s.dataset.recipes;
    let mut ex = train_extractor(
        recipes,
        dict,
        &TaggerConfig { epochs: 3, ..Default::default() },
        &AdjudicatorConfig { epochs: 10, ..Default::default() },
        300,
    )
    .unwrap();
    let with: Vec<Extraction> = recipes.iter().map(|r| ex.extract(r).unwrap()).collect();
    ex.recovery = false;
    for (r, w) in recipes.iter().zip(&with) {
        let without = ex.extract(r).unwrap();
        for e in &without.entities {
            assert!(w.entities.contains(e));
        }
        for p in &without.accepted {
            assert!(p.iter().all(|t| !t.contains('_')));
        }
    }
}
