//! Deterministic synthetic corpus over a small two-domain schema.
//!
//! Dialogues run 2–6 turns; each turn adds one to three fresh slots with
//! templated utterances. Every new PTR value appears literally in the user
//! utterance, and carried values appear in the serialized previous state, so
//! copy-based value decoding is learnable at desk scale. States are
//! cumulative and the generator never deletes or overwrites, so state sizes
//! are monotonically non-decreasing. The split is 80/10/10 by dialogue index.

use csfn_core::schema::SchemaDef;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::data::{Corpus, Dialogue, Turn};

pub fn toy_schema_def() -> SchemaDef {
    SchemaDef::new(
        vec!["hotel".into(), "restaurant".into()],
        vec![
            vec!["area".into(), "price range".into(), "book day".into(), "parking".into()],
            vec!["area".into(), "food".into(), "day".into()],
        ],
        vec![("book day".into(), "day".into())],
    )
    .expect("toy schema is well-formed")
}

const AREAS: [&str; 5] = ["north", "south", "east", "west", "centre"];
const PRICES: [&str; 3] = ["cheap", "moderate", "expensive"];
const DAYS: [&str; 7] = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const PARKING: [&str; 2] = ["yes", "no"];
const FOODS: [&str; 6] = ["chinese", "italian", "indian", "british", "thai", "modern european"];

const SYSTEM_ACKS: [&str; 4] = ["okay .", "sure , noted .", "got it , anything else ?", "alright ."];

/// Slot ordinals inside this generator (not schema ordinals).
#[derive(Clone, Copy, PartialEq)]
enum Slot {
    HotelArea,
    HotelPrice,
    HotelBookDay,
    HotelParking,
    RestaurantArea,
    RestaurantFood,
    RestaurantDay,
}

const ALL_SLOTS: [Slot; 7] = [
    Slot::HotelArea,
    Slot::HotelPrice,
    Slot::HotelBookDay,
    Slot::HotelParking,
    Slot::RestaurantArea,
    Slot::RestaurantFood,
    Slot::RestaurantDay,
];

impl Slot {
    fn names(self) -> (&'static str, &'static str) {
        match self {
            Slot::HotelArea => ("hotel", "area"),
            Slot::HotelPrice => ("hotel", "price range"),
            Slot::HotelBookDay => ("hotel", "book day"),
            Slot::HotelParking => ("hotel", "parking"),
            Slot::RestaurantArea => ("restaurant", "area"),
            Slot::RestaurantFood => ("restaurant", "food"),
            Slot::RestaurantDay => ("restaurant", "day"),
        }
    }

    fn dontcare_able(self) -> bool {
        matches!(self, Slot::HotelParking | Slot::RestaurantFood)
    }

    fn pick_value(self, rng: &mut ChaCha20Rng) -> &'static str {
        match self {
            Slot::HotelArea | Slot::RestaurantArea => AREAS[rng.gen_range(0..AREAS.len())],
            Slot::HotelPrice => PRICES[rng.gen_range(0..PRICES.len())],
            Slot::HotelBookDay | Slot::RestaurantDay => DAYS[rng.gen_range(0..DAYS.len())],
            Slot::HotelParking => PARKING[rng.gen_range(0..PARKING.len())],
            Slot::RestaurantFood => FOODS[rng.gen_range(0..FOODS.len())],
        }
    }

    /// A user clause literally containing the value.
    fn clause(self, value: &str, rng: &mut ChaCha20Rng) -> String {
        let flip = rng.gen_bool(0.5);
        match self {
            Slot::HotelArea => {
                if flip {
                    format!("i need a hotel in the {value}")
                } else {
                    format!("find me a hotel in the {value}")
                }
            }
            Slot::HotelPrice => {
                if flip {
                    format!("i want a {value} hotel")
                } else {
                    format!("the hotel should be {value}")
                }
            }
            Slot::HotelBookDay => {
                if flip {
                    format!("book the hotel for {value}")
                } else {
                    format!("the hotel booking is for {value}")
                }
            }
            Slot::HotelParking => {
                if value == "yes" {
                    "the hotel needs parking , yes".to_string()
                } else {
                    "no , the hotel does not need parking".to_string()
                }
            }
            Slot::RestaurantArea => {
                if flip {
                    format!("i want a restaurant in the {value}")
                } else {
                    format!("look for a restaurant in the {value}")
                }
            }
            Slot::RestaurantFood => {
                if flip {
                    format!("find a {value} restaurant")
                } else {
                    format!("i would like {value} food")
                }
            }
            Slot::RestaurantDay => {
                if flip {
                    format!("the restaurant visit is on {value}")
                } else {
                    format!("we will eat there on {value}")
                }
            }
        }
    }

    fn dontcare_clause(self) -> &'static str {
        match self {
            Slot::HotelParking => "i dont care about hotel parking",
            Slot::RestaurantFood => "any kind of food is fine , i dont care",
            _ => unreachable!("only parking and food accept dont care"),
        }
    }
}

pub fn generate_toy_corpus(n_dialogues: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut dialogues = Vec::with_capacity(n_dialogues);
    for idx in 0..n_dialogues {
        dialogues.push(generate_dialogue(idx, &mut rng));
    }
    let n_train = n_dialogues * 8 / 10;
    let n_valid = n_dialogues / 10;
    let mut it = dialogues.into_iter();
    let train: Vec<Dialogue> = it.by_ref().take(n_train).collect();
    let valid: Vec<Dialogue> = it.by_ref().take(n_valid).collect();
    let test: Vec<Dialogue> = it.collect();
    Corpus { train, valid, test }
}

fn generate_dialogue(index: usize, rng: &mut ChaCha20Rng) -> Dialogue {
    let n_turns = rng.gen_range(2..=6usize);
    let mut free: Vec<Slot> = ALL_SLOTS.to_vec();
    free.shuffle(rng);
    let mut state: Vec<(String, String, String)> = Vec::new();
    let mut turns = Vec::with_capacity(n_turns);
    for t in 0..n_turns {
        let turns_left = n_turns - t;
        // leave at least one fresh slot for each remaining turn
        let max_new = free.len().saturating_sub(turns_left - 1).min(3).max(1);
        let n_new = rng.gen_range(1..=max_new);
        let mut clauses = Vec::with_capacity(n_new);
        for _ in 0..n_new {
            let slot = free.pop().expect("turn budgeting leaves slots available");
            let (domain, slot_name) = slot.names();
            if slot.dontcare_able() && rng.gen_bool(0.35) {
                clauses.push(slot.dontcare_clause().to_string());
                state.push((domain.into(), slot_name.into(), "dont care".into()));
            } else {
                let value = slot.pick_value(rng);
                clauses.push(slot.clause(value, rng));
                state.push((domain.into(), slot_name.into(), value.into()));
            }
        }
        let system = if t == 0 {
            String::new()
        } else {
            SYSTEM_ACKS[rng.gen_range(0..SYSTEM_ACKS.len())].to_string()
        };
        let mut sorted_state = state.clone();
        sorted_state.sort();
        turns.push(Turn {
            system,
            user: clauses.join(" and "),
            state: sorted_state,
        });
    }
    Dialogue {
        id: format!("toy-{index:04}"),
        turns,
    }
}
