//! Symbolic scenes: objects with boxes and categorized attributes, pairwise
//! relations, and a question/answer table for `simple_query`.
//!
//! Coordinates follow the image convention used by the API: `upper > lower`,
//! so y grows upward.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_answer;

/// `(left, lower, right, upper)` in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i64; 4]", into = "[i64; 4]")]
pub struct BBox {
    pub left: i64,
    pub lower: i64,
    pub right: i64,
    pub upper: i64,
}

impl From<[i64; 4]> for BBox {
    fn from([left, lower, right, upper]: [i64; 4]) -> Self {
        BBox {
            left,
            lower,
            right,
            upper,
        }
    }
}

impl From<BBox> for [i64; 4] {
    fn from(b: BBox) -> Self {
        [b.left, b.lower, b.right, b.upper]
    }
}

impl BBox {
    pub const fn new(left: i64, lower: i64, right: i64, upper: i64) -> Self {
        BBox {
            left,
            lower,
            right,
            upper,
        }
    }

    /// Center scaled by two so it stays integral.
    pub fn center2(&self) -> (i64, i64) {
        (self.left + self.right, self.lower + self.upper)
    }

    /// Whether a doubled center point lies in this box (edges inclusive).
    pub fn contains_center2(&self, (x2, y2): (i64, i64)) -> bool {
        2 * self.left <= x2 && x2 <= 2 * self.right && 2 * self.lower <= y2 && y2 <= 2 * self.upper
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            left: self.left.min(other.left),
            lower: self.lower.min(other.lower),
            right: self.right.max(other.right),
            upper: self.upper.max(other.upper),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attribute {
    pub value: String,
    pub category: String,
}

mod attribute_pairs {
    use super::Attribute;
    use alloc::string::String;
    use alloc::vec::Vec;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(attrs: &[Attribute], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(attrs.iter().map(|a| (&a.value, &a.category)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Attribute>, D::Error> {
        let pairs: Vec<(String, String)> = Vec::deserialize(d)?;
        Ok(pairs
            .into_iter()
            .map(|(value, category)| Attribute { value, category })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    pub bbox: BBox,
    #[serde(default, with = "attribute_pairs")]
    pub attributes: Vec<Attribute>,
}

impl SceneObject {
    pub fn new(id: impl Into<String>, name: impl Into<String>, bbox: BBox) -> Self {
        SceneObject {
            id: id.into(),
            name: name.into(),
            synonyms: Vec::new(),
            bbox,
            attributes: Vec::new(),
        }
    }

    pub fn with_attribute(mut self, value: impl Into<String>, category: impl Into<String>) -> Self {
        self.attributes.push(Attribute {
            value: value.into(),
            category: category.into(),
        });
        self
    }

    pub fn with_synonym(mut self, synonym: impl Into<String>) -> Self {
        self.synonyms.push(synonym.into());
        self
    }

    /// Case-insensitive match on name or any synonym.
    pub fn answers_to(&self, noun: &str) -> bool {
        let noun = noun.trim();
        !noun.is_empty()
            && (self.name.eq_ignore_ascii_case(noun)
                || self.synonyms.iter().any(|s| s.eq_ignore_ascii_case(noun)))
    }

    pub fn has_attribute(&self, value: &str) -> bool {
        let value = value.trim();
        self.attributes
            .iter()
            .any(|a| a.value.eq_ignore_ascii_case(value))
    }

    pub fn attribute_in(&self, category: &str) -> Option<&str> {
        let category = category.trim();
        self.attributes
            .iter()
            .find(|a| a.category.eq_ignore_ascii_case(category))
            .map(|a| a.value.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

mod relation_triples {
    use super::Relation;
    use alloc::string::String;
    use alloc::vec::Vec;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rels: &[Relation], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(rels.iter().map(|r| (&r.subject, &r.predicate, &r.object)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Relation>, D::Error> {
        let triples: Vec<(String, String, String)> = Vec::deserialize(d)?;
        Ok(triples
            .into_iter()
            .map(|(subject, predicate, object)| Relation {
                subject,
                predicate,
                object,
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub scene_id: String,
    pub width: i64,
    pub height: i64,
    pub objects: Vec<SceneObject>,
    #[serde(default, with = "relation_triples")]
    pub relations: Vec<Relation>,
    /// `(question, answer)` pairs consulted by `simple_query`.
    #[serde(default)]
    pub qa: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SceneError {
    #[error("scene {scene}: duplicate object id {id:?}")]
    DuplicateId { scene: String, id: String },
    #[error("scene {scene}: relation references unknown object {id:?}")]
    DanglingRelation { scene: String, id: String },
    #[error("scene {scene}: object {id:?} has an invalid or out-of-bounds box")]
    BadBox { scene: String, id: String },
    #[error("scene {scene}: object {id:?} repeats attribute {value:?}")]
    DuplicateAttribute {
        scene: String,
        id: String,
        value: String,
    },
    #[error("scene {scene}: non-positive image size")]
    BadSize { scene: String },
}

impl SceneGraph {
    pub fn new(scene_id: impl Into<String>, width: i64, height: i64) -> Self {
        SceneGraph {
            scene_id: scene_id.into(),
            width,
            height,
            objects: Vec::new(),
            relations: Vec::new(),
            qa: Vec::new(),
        }
    }

    pub fn with_object(mut self, object: SceneObject) -> Self {
        self.objects.push(object);
        self
    }

    pub fn with_relation(mut self, subject: &str, predicate: &str, object: &str) -> Self {
        self.relations.push(Relation {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        });
        self
    }

    pub fn with_qa(mut self, question: &str, answer: &str) -> Self {
        self.qa.push((question.into(), answer.into()));
        self
    }

    pub fn full_box(&self) -> BBox {
        BBox::new(0, 0, self.width, self.height)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let scene = || self.scene_id.clone();
        if self.width <= 0 || self.height <= 0 {
            return Err(SceneError::BadSize { scene: scene() });
        }
        let mut ids = BTreeSet::new();
        for object in &self.objects {
            if !ids.insert(object.id.as_str()) {
                return Err(SceneError::DuplicateId {
                    scene: scene(),
                    id: object.id.clone(),
                });
            }
            let b = object.bbox;
            if !(0 <= b.left && b.left < b.right && b.right <= self.width)
                || !(0 <= b.lower && b.lower < b.upper && b.upper <= self.height)
            {
                return Err(SceneError::BadBox {
                    scene: scene(),
                    id: object.id.clone(),
                });
            }
            let mut seen = BTreeSet::new();
            for attr in &object.attributes {
                if !seen.insert(attr.value.to_lowercase()) {
                    return Err(SceneError::DuplicateAttribute {
                        scene: scene(),
                        id: object.id.clone(),
                        value: attr.value.clone(),
                    });
                }
            }
        }
        for rel in &self.relations {
            for id in [&rel.subject, &rel.object] {
                if !ids.contains(id.as_str()) {
                    return Err(SceneError::DanglingRelation {
                        scene: scene(),
                        id: id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Answer for a question after normalization, if listed.
    pub fn lookup_qa(&self, question: &str) -> Option<&str> {
        let key = normalize_answer(question);
        self.qa
            .iter()
            .find(|(q, _)| normalize_answer(q) == key)
            .map(|(_, a)| a.as_str())
    }

    /// Whether `(subject, predicate, object)` is listed, comparing
    /// predicates case-insensitively.
    pub fn related(&self, subject: &str, predicate: &str, object: &str) -> bool {
        let predicate = normalize_answer(predicate);
        self.relations.iter().any(|r| {
            r.subject == subject && r.object == object && normalize_answer(&r.predicate) == predicate
        })
    }

    pub fn describe(&self) -> String {
        format!(
            "{} ({}x{}, {} objects)",
            self.scene_id,
            self.width,
            self.height,
            self.objects.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> SceneGraph {
        SceneGraph::new("s1", 100, 80)
            .with_object(SceneObject::new("chair#1", "chair", BBox::new(5, 5, 20, 30)).with_attribute("red", "color"))
            .with_object(SceneObject::new("table#1", "table", BBox::new(40, 5, 90, 40)))
            .with_relation("chair#1", "next to", "table#1")
            .with_qa("Who is riding?", "nobody")
    }

    #[test]
    fn valid_scene_passes() {
        assert_eq!(scene().validate(), Ok(()));
    }

    #[test]
    fn invalid_scenes_are_rejected() {
        let s = scene().with_object(SceneObject::new("chair#1", "chair", BBox::new(1, 1, 2, 2)));
        assert!(matches!(s.validate(), Err(SceneError::DuplicateId { .. })));
        let s = scene().with_object(SceneObject::new("x", "x", BBox::new(90, 5, 120, 10)));
        assert!(matches!(s.validate(), Err(SceneError::BadBox { .. })));
        let s = scene().with_relation("chair#1", "on", "ghost");
        assert!(matches!(s.validate(), Err(SceneError::DanglingRelation { .. })));
        let s = scene().with_object(
            SceneObject::new("y", "y", BBox::new(1, 1, 2, 2))
                .with_attribute("red", "color")
                .with_attribute("Red", "other"),
        );
        assert!(matches!(s.validate(), Err(SceneError::DuplicateAttribute { .. })));
    }

    #[test]
    fn qa_lookup_is_normalized() {
        assert_eq!(scene().lookup_qa("who is  riding"), Some("nobody"));
        assert_eq!(scene().lookup_qa("who is walking"), None);
    }

    #[test]
    fn centers_use_doubled_coordinates() {
        let b = BBox::new(5, 5, 20, 30);
        assert_eq!(b.center2(), (25, 35));
        assert!(BBox::new(0, 0, 13, 18).contains_center2(b.center2()));
        assert!(!BBox::new(0, 0, 12, 18).contains_center2(b.center2()));
    }
}
