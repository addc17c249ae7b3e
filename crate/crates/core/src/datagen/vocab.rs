// SPDX-License-Identifier: MIT OR Apache-2.0

//! Built-in word lists, split into disjoint ID and OOD halves.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::datagen::Distribution;
use crate::error::{Error, Result};

/// Category → word list for one distribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularySet {
    pub distribution: Distribution,
    pub categories: BTreeMap<String, Vec<String>>,
}

impl VocabularySet {
    pub fn new(distribution: Distribution, categories: BTreeMap<String, Vec<String>>) -> Self {
        Self { distribution, categories }
    }

    pub fn words(&self, category: &str) -> Result<&[String]> {
        match self.categories.get(category) {
            Some(w) if !w.is_empty() => Ok(w),
            _ => Err(Error::VocabularyTooSmall(alloc::format!("category `{category}` is missing or empty"))),
        }
    }

    /// Every surface phrase in the set, with `a|b` and `a:b` entries broken
    /// into their parts. Multi-word entries stay whole.
    pub fn surface_phrases(&self) -> alloc::collections::BTreeSet<String> {
        let mut out = alloc::collections::BTreeSet::new();
        for list in self.categories.values() {
            for entry in list {
                for part in entry.split(['|', ':']) {
                    out.insert(part.trim().to_string());
                }
            }
        }
        out
    }

    /// Fails on the first entry shared between two sets in the same category.
    pub fn check_disjoint(&self, other: &VocabularySet) -> Result<()> {
        for (cat, words) in &self.categories {
            if let Some(theirs) = other.categories.get(cat) {
                if let Some(w) = words.iter().find(|w| theirs.contains(w)) {
                    return Err(Error::VocabularyOverlap { category: cat.clone(), word: w.clone() });
                }
            }
        }
        Ok(())
    }

    /// The shipped vocabulary for `distribution`.
    pub fn builtin(distribution: Distribution) -> Self {
        let half = match distribution {
            Distribution::Id => &ID,
            Distribution::Ood => &OOD,
        };
        let mut cats: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut put = |k: &str, v: String| cats.entry(k.to_string()).or_default().push(v);
        for row in half.nouns {
            let (sg, pl) = row.split_once(' ').unwrap_or((row, row));
            put("noun_sg", sg.to_string());
            put("noun_pl", pl.to_string());
        }
        for (prefix, rows) in [("tverb", half.tverbs), ("pverb", half.pverbs)] {
            for row in rows {
                let f: Vec<&str> = row.split(',').collect();
                put(&alloc::format!("{prefix}_base"), f[0].to_string());
                put(&alloc::format!("{prefix}_3sg"), f[1].to_string());
                put(&alloc::format!("{prefix}_past"), f[2].to_string());
                put(&alloc::format!("{prefix}_pp"), f[3].to_string());
                put(&alloc::format!("{prefix}_ing"), f[4].to_string());
                if f[2] == f[3] {
                    put(&alloc::format!("{prefix}_pastpp"), f[2].to_string());
                }
            }
        }
        for (cat, list) in [
            ("iverb", half.iverbs),
            ("adj", half.adjs),
            ("sup_adj", half.sups),
            ("know_verb", half.know),
            ("wonder_verb", half.wonder),
            ("clear_adj", half.clear),
            ("capital", half.capitals),
        ] {
            for w in list {
                put(cat, w.to_string());
            }
        }
        Self { distribution, categories: cats }
    }
}

struct Half {
    nouns: &'static [&'static str],
    tverbs: &'static [&'static str],
    pverbs: &'static [&'static str],
    iverbs: &'static [&'static str],
    adjs: &'static [&'static str],
    sups: &'static [&'static str],
    know: &'static [&'static str],
    wonder: &'static [&'static str],
    clear: &'static [&'static str],
    capitals: &'static [&'static str],
}

static ID: Half = Half {
    nouns: &[
        "man men", "woman women", "boy boys", "girl girls", "teacher teachers", "doctor doctors",
        "patient patients", "lady ladies", "customer customers", "boss bosses", "dancer dancers",
        "kid kids", "guest guests", "host hosts", "actor actors", "student students", "senator senators",
        "lawyer lawyers", "farmer farmers", "sister sisters", "baker bakers", "singer singers",
        "driver drivers", "writer writers", "player players", "officer officers", "manager managers",
        "child children", "parent parents", "neighbor neighbors", "friend friends", "cousin cousins",
        "waiter waiters", "artist artists", "banker bankers", "coach coaches", "chef chefs",
        "soldier soldiers", "clerk clerks", "tourist tourists", "dentist dentists", "author authors",
        "guard guards", "king kings",
    ],
    tverbs: &[
        "like,likes,liked,liked,liking",
        "admire,admires,admired,admired,admiring",
        "choose,chooses,chose,chosen,choosing",
        "scare,scares,scared,scared,scaring",
        "hate,hates,hated,hated,hating",
        "visit,visits,visited,visited,visiting",
        "help,helps,helped,helped,helping",
        "call,calls,called,called,calling",
        "meet,meets,met,met,meeting",
        "praise,praises,praised,praised,praising",
        "thank,thanks,thanked,thanked,thanking",
        "hug,hugs,hugged,hugged,hugging",
        "greet,greets,greeted,greeted,greeting",
        "hire,hires,hired,hired,hiring",
        "blame,blames,blamed,blamed,blaming",
        "trust,trusts,trusted,trusted,trusting",
        "love,loves,loved,loved,loving",
        "follow,follows,followed,followed,following",
        "watch,watches,watched,watched,watching",
        "see,sees,saw,seen,seeing",
        "hear,hears,heard,heard,hearing",
        "teach,teaches,taught,taught,teaching",
        "pay,pays,paid,paid,paying",
        "ignore,ignores,ignored,ignored,ignoring",
        "annoy,annoys,annoyed,annoyed,annoying",
        "confuse,confuses,confused,confused,confusing",
        "amuse,amuses,amused,amused,amusing",
        "impress,impresses,impressed,impressed,impressing",
        "surprise,surprises,surprised,surprised,surprising",
        "insult,insults,insulted,insulted,insulting",
        "sell,sells,sold,sold,selling",
        "find,finds,found,found,finding",
        "eat,eats,ate,eaten,eating",
        "show,shows,showed,shown,showing",
        "make,makes,made,made,making",
        "buy,buys,bought,bought,buying",
        "invite,invites,invited,invited,inviting",
        "warn,warns,warned,warned,warning",
        "serve,serves,served,served,serving",
        "forgive,forgives,forgave,forgiven,forgiving",
        "remember,remembers,remembered,remembered,remembering",
        "support,supports,supported,supported,supporting",
    ],
    pverbs: &[
        "sound like,sounds like,sounded like,sounded like,sounding like",
        "listen to,listens to,listened to,listened to,listening to",
        "talk to,talks to,talked to,talked to,talking to",
        "look at,looks at,looked at,looked at,looking at",
        "laugh at,laughs at,laughed at,laughed at,laughing at",
        "wait for,waits for,waited for,waited for,waiting for",
        "care for,cares for,cared for,cared for,caring for",
        "point at,points at,pointed at,pointed at,pointing at",
        "stare at,stares at,stared at,stared at,staring at",
        "smile at,smiles at,smiled at,smiled at,smiling at",
        "think about,thinks about,thought about,thought about,thinking about",
        "worry about,worries about,worried about,worried about,worrying about",
    ],
    iverbs: &[
        "sleep", "leave", "sing", "dance", "wait", "cry", "laugh", "smile", "rest", "swim", "run",
        "walk", "jog", "sit", "stand", "talk", "shout", "whisper", "pray", "cook", "read", "write",
        "study", "work", "play", "travel", "arrive", "return", "complain", "relax", "sneeze", "cough",
        "yawn", "blush", "frown", "wave", "nod", "kneel", "hide", "vote",
    ],
    adjs: &[
        "upset", "tall", "young", "old", "happy", "angry", "busy", "quiet", "clever", "brave", "kind",
        "rude", "shy", "calm", "proud", "lazy", "polite", "famous", "rich", "poor", "strong", "weak",
        "honest", "funny", "serious", "nervous", "careful", "curious", "gentle", "loud", "friendly",
        "lucky", "tired", "hungry", "sick", "bored", "cheerful", "clumsy", "eager", "foolish",
    ],
    sups: &[
        "fastest|fast", "tallest|tall", "oldest|old", "youngest|young", "richest|rich",
        "smartest|smart", "kindest|kind", "strongest|strong", "bravest|brave", "happiest|happy",
        "busiest|busy", "calmest|calm", "loudest|loud", "proudest|proud", "shyest|shy",
    ],
    know: &["knows", "remembers", "forgot", "learned"],
    wonder: &["wondered", "asked"],
    clear: &["clear", "obvious", "certain"],
    capitals: &[
        "Paris:France", "Rome:Italy", "Berlin:Germany", "Madrid:Spain", "Tokyo:Japan", "Cairo:Egypt",
        "Lima:Peru", "Oslo:Norway", "Athens:Greece", "Vienna:Austria", "Dublin:Ireland",
        "Lisbon:Portugal", "Moscow:Russia", "Ottawa:Canada", "Havana:Cuba", "Nairobi:Kenya",
        "Bangkok:Thailand", "Hanoi:Vietnam", "Beijing:China", "Stockholm:Sweden", "Helsinki:Finland",
        "Warsaw:Poland", "Budapest:Hungary", "Canberra:Australia",
    ],
};

static OOD: Half = Half {
    nouns: &[
        "nurse nurses", "pilot pilots", "sailor sailors", "judge judges", "pianist pianists",
        "plumber plumbers", "surgeon surgeons", "tailor tailors", "barber barbers", "poet poets",
        "painter painters", "miner miners", "butcher butchers", "cashier cashiers", "janitor janitors",
        "pastor pastors", "priest priests", "monk monks", "knight knights", "queen queens",
        "prince princes", "princess princesses", "mayor mayors", "sheriff sheriffs", "detective detectives",
        "journalist journalists", "editor editors", "scientist scientists", "engineer engineers",
        "architect architects", "carpenter carpenters", "gardener gardeners", "fisherman fishermen",
        "hunter hunters", "shepherd shepherds", "librarian librarians", "professor professors",
        "tutor tutors", "violinist violinists", "drummer drummers", "captain captains", "pirate pirates",
    ],
    tverbs: &[
        "respect,respects,respected,respected,respecting",
        "attack,attacks,attacked,attacked,attacking",
        "hurt,hurts,hurt,hurt,hurting",
        "kick,kicks,kicked,kicked,kicking",
        "push,pushes,pushed,pushed,pushing",
        "marry,marries,married,married,marrying",
        "fight,fights,fought,fought,fighting",
        "defend,defends,defended,defended,defending",
        "protect,protects,protected,protected,protecting",
        "rescue,rescues,rescued,rescued,rescuing",
        "interview,interviews,interviewed,interviewed,interviewing",
        "punish,punishes,punished,punished,punishing",
        "reward,rewards,rewarded,rewarded,rewarding",
        "encourage,encourages,encouraged,encouraged,encouraging",
        "convince,convinces,convinced,convinced,convincing",
        "tease,teases,teased,teased,teasing",
        "mock,mocks,mocked,mocked,mocking",
        "adore,adores,adored,adored,adoring",
        "fear,fears,feared,feared,fearing",
        "envy,envies,envied,envied,envying",
        "pity,pities,pitied,pitied,pitying",
        "miss,misses,missed,missed,missing",
        "notice,notices,noticed,noticed,noticing",
        "recognize,recognizes,recognized,recognized,recognizing",
        "approach,approaches,approached,approached,approaching",
        "avoid,avoids,avoided,avoided,avoiding",
        "chase,chases,chased,chased,chasing",
        "catch,catches,caught,caught,catching",
        "join,joins,joined,joined,joining",
        "inspire,inspires,inspired,inspired,inspiring",
        "frighten,frightens,frightened,frightened,frightening",
        "scold,scolds,scolded,scolded,scolding",
        "distract,distracts,distracted,distracted,distracting",
        "comfort,comforts,comforted,comforted,comforting",
        "examine,examines,examined,examined,examining",
        "consult,consults,consulted,consulted,consulting",
        "employ,employs,employed,employed,employing",
        "feed,feeds,fed,fed,feeding",
        "steal,steals,stole,stolen,stealing",
        "paint,paints,painted,painted,painting",
        "describe,describes,described,described,describing",
        "imitate,imitates,imitated,imitated,imitating",
    ],
    pverbs: &[
        "rely on,relies on,relied on,relied on,relying on",
        "depend on,depends on,depended on,depended on,depending on",
        "shout at,shouts at,shouted at,shouted at,shouting at",
        "yell at,yells at,yelled at,yelled at,yelling at",
        "glance at,glances at,glanced at,glanced at,glancing at",
        "look after,looks after,looked after,looked after,looking after",
        "gossip about,gossips about,gossiped about,gossiped about,gossiping about",
        "dream about,dreams about,dreamed about,dreamed about,dreaming about",
        "speak to,speaks to,spoke to,spoken to,speaking to",
        "argue with,argues with,argued with,argued with,arguing with",
        "agree with,agrees with,agreed with,agreed with,agreeing with",
        "search for,searches for,searched for,searched for,searching for",
    ],
    iverbs: &[
        "tremble", "agree", "retire", "hesitate", "faint", "panic", "snore", "sigh", "giggle", "shiver",
        "sweat", "bow", "shrug", "grin", "scream", "wander", "stumble", "march", "climb", "dive",
        "skate", "ski", "surf", "hike", "paddle", "sail", "knit", "sew", "bake", "camp", "gamble",
        "meditate", "fidget", "celebrate", "recover", "apologize", "volunteer", "whistle", "doze",
        "mumble",
    ],
    adjs: &[
        "grumpy", "cautious", "elderly", "wealthy", "humble", "jealous", "fierce", "gloomy", "greedy",
        "careless", "sleepy", "thirsty", "sneaky", "stubborn", "timid", "wise", "witty", "bold",
        "anxious", "cruel", "generous", "modest", "thoughtful", "picky", "loyal", "lonely", "grateful",
        "cranky", "restless", "sincere", "tense", "tough", "vain", "weary", "zealous", "brilliant",
        "charming", "diligent", "gifted", "jolly",
    ],
    sups: &[
        "slowest|slow", "shortest|short", "wisest|wise", "boldest|bold", "fiercest|fierce",
        "greediest|greedy", "sleepiest|sleepy", "toughest|tough", "vainest|vain", "wealthiest|wealthy",
        "humblest|humble", "cruelest|cruel", "gloomiest|gloomy", "thirstiest|thirsty", "sneakiest|sneaky",
    ],
    know: &["discovered", "noticed", "revealed", "understood"],
    wonder: &["inquired", "questioned"],
    clear: &["evident", "apparent", "likely"],
    capitals: &[
        "Tehran:Iran", "Baghdad:Iraq", "Kabul:Afghanistan", "Santiago:Chile", "Caracas:Venezuela",
        "Bogota:Colombia", "Quito:Ecuador", "Ankara:Turkey", "Copenhagen:Denmark", "Brussels:Belgium",
        "Bern:Switzerland", "Jakarta:Indonesia", "Islamabad:Pakistan", "Damascus:Syria",
        "Beirut:Lebanon", "Amman:Jordan", "Accra:Ghana", "Dakar:Senegal", "Kampala:Uganda",
        "Rabat:Morocco", "Tunis:Tunisia", "Algiers:Algeria", "Montevideo:Uruguay", "Reykjavik:Iceland",
    ],
};
