//! Template extraction and instantiation.
//!
//! A template is a renamed program whose argument slots are replaced by
//! `<arg_i>` placeholders. Two templates are equal when their canonical text
//! is byte-identical.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ast::Program;
use crate::error::TemplateError;
use crate::parser::parse;
use crate::printer::print_canonical;
use crate::rename::rename_variables;
use crate::slots::{call_signature, rewrite_slots, string_literal_slots};
use crate::text::fnv64;

pub fn placeholder(index: usize) -> String {
    format!("<arg_{index}>")
}

#[derive(Clone, Debug)]
pub struct Template {
    body: Program,
    text: String,
    slot_count: usize,
    signature: Vec<String>,
}

impl PartialEq for Template {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Eq for Template {}

impl Template {
    pub fn body(&self) -> &Program {
        &self.body
    }

    /// Canonical text of the abstracted body.
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn signature(&self) -> &[String] {
        &self.signature
    }

    /// Stable 16-hex-digit identifier derived from the template text.
    pub fn id(&self) -> String {
        format!("{:016x}", fnv64(self.text.as_bytes()))
    }

    /// Rebuilds a template from its canonical text.
    pub fn from_text(text: &str) -> Result<Template, TemplateError> {
        let body = parse(text)?;
        Ok(Template::from_body(body))
    }

    fn from_body(body: Program) -> Template {
        let slot_count = string_literal_slots(&body).len();
        let signature = call_signature(&body);
        let text = print_canonical(&body);
        Template {
            body,
            text,
            slot_count,
            signature,
        }
    }

    pub fn to_record(&self) -> TemplateFileRecord {
        TemplateFileRecord {
            template_id: self.id(),
            template_text: self.text.clone(),
            signature: self.signature.clone(),
            slot_count: self.slot_count,
        }
    }
}

/// One row of the templates JSONL file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateFileRecord {
    pub template_id: String,
    pub template_text: String,
    pub signature: Vec<String>,
    pub slot_count: usize,
}

/// Concrete argument values for a template, index-aligned with its slots.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgBinding {
    pub values: Vec<String>,
    /// Partition of slot indices by equal value, ordered by first index.
    pub link_groups: Vec<Vec<usize>>,
}

impl ArgBinding {
    pub fn new(values: Vec<String>) -> Self {
        let mut link_groups: Vec<Vec<usize>> = Vec::new();
        for (i, value) in values.iter().enumerate() {
            match link_groups.iter_mut().find(|g| values[g[0]] == *value) {
                Some(group) => group.push(i),
                None => link_groups.push(alloc::vec![i]),
            }
        }
        ArgBinding {
            values,
            link_groups,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateRecord {
    pub question: String,
    pub template: Template,
    pub args: ArgBinding,
    pub source_id: String,
}

impl TemplateRecord {
    pub fn with_source(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    /// The renamed program this record was extracted from.
    pub fn program_text(&self) -> String {
        instantiate(&self.template, &self.args).expect("record binding matches its template")
    }
}

/// Replaces each argument slot with `<arg_i>` in appearance order.
/// Expects an already-renamed program.
pub fn abstract_arguments(program: &Program) -> (Template, ArgBinding) {
    let mut body = program.clone();
    let mut values = Vec::new();
    rewrite_slots(&mut body, |i, value| {
        values.push(core::mem::replace(value, placeholder(i)));
    });
    (Template::from_body(body), ArgBinding::new(values))
}

/// parse, rename, abstract.
pub fn extract(question: &str, program_source: &str) -> Result<TemplateRecord, TemplateError> {
    let program = parse(program_source)?;
    Ok(extract_program(question, &program))
}

pub fn extract_program(question: &str, program: &Program) -> TemplateRecord {
    let renamed = rename_variables(program);
    let (template, args) = abstract_arguments(&renamed);
    TemplateRecord {
        question: String::from(question),
        template,
        args,
        source_id: String::new(),
    }
}

/// Substitutes `args` into the template's slots and prints the result.
pub fn instantiate(template: &Template, args: &ArgBinding) -> Result<String, TemplateError> {
    instantiate_values(template, &args.values)
}

pub fn instantiate_values(template: &Template, values: &[String]) -> Result<String, TemplateError> {
    if values.len() != template.slot_count {
        return Err(TemplateError::ArityMismatch {
            expected: template.slot_count,
            actual: values.len(),
        });
    }
    let mut body = template.body.clone();
    rewrite_slots(&mut body, |i, value| *value = values[i].clone());
    Ok(print_canonical(&body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const SAME_COLOR: &str = "image_patch = ImagePatch(image)\ncat = image_patch.find('cat')\ncat_color = cat.classify('color')\nshirt = image_patch.find('tshirt')\nshirt_color = shirt.classify('color')\nanswer = bool_to_yesno(cat_color == shirt_color)";

    const SAME_COLOR_TEMPLATE: &str = "image_patch=ImagePatch(image)\nvar1=image_patch.find('<arg_0>')\nvar2=var1.classify('<arg_1>')\nvar3=image_patch.find('<arg_2>')\nvar4=var3.classify('<arg_3>')\nanswer=bool_to_yesno(var2 == var4)";

    fn strings(values: &[&str]) -> Vec<String> {
        values.iter().map(|s| String::from(*s)).collect()
    }

    #[test]
    fn same_color_template_and_binding() {
        let record = extract("Are the cat and the tshirt the same color?", SAME_COLOR).unwrap();
        assert_eq!(record.template.text(), SAME_COLOR_TEMPLATE);
        assert_eq!(record.template.slot_count(), 4);
        assert_eq!(
            record.template.signature(),
            ["ImagePatch", "find", "classify", "find", "classify", "bool_to_yesno"]
        );
        assert_eq!(record.args.values, ["cat", "color", "tshirt", "color"]);
        assert_eq!(record.args.link_groups, vec![vec![0], vec![1, 3], vec![2]]);
    }

    #[test]
    fn same_color_row_three_instantiation() {
        let record = extract("Are the cat and the tshirt the same color?", SAME_COLOR).unwrap();
        let program = instantiate(
            &record.template,
            &ArgBinding::new(strings(&["vase", "shape", "table", "shape"])),
        )
        .unwrap();
        assert_eq!(
            program,
            "image_patch=ImagePatch(image)\nvar1=image_patch.find('vase')\nvar2=var1.classify('shape')\nvar3=image_patch.find('table')\nvar4=var3.classify('shape')\nanswer=bool_to_yesno(var2 == var4)"
        );
    }

    #[test]
    fn zero_slot_template() {
        let record = extract("q", "image_patch = ImagePatch(image)\nanswer = str(len(image_patch.left))").unwrap();
        assert_eq!(record.template.slot_count(), 0);
        assert!(record.args.is_empty());
        assert_eq!(
            instantiate(&record.template, &ArgBinding::default()).unwrap(),
            record.template.text()
        );
    }

    #[test]
    fn whole_question_simple_query() {
        let record = extract(
            "Who is riding?",
            "answer=image_patch.simple_query('Who is riding?')",
        )
        .unwrap();
        assert_eq!(record.template.slot_count(), 1);
        assert_eq!(record.args.values, ["Who is riding?"]);
    }

    #[test]
    fn arity_mismatch() {
        let record = extract("q", SAME_COLOR).unwrap();
        let err = instantiate(&record.template, &ArgBinding::new(strings(&["a"]))).unwrap_err();
        assert_eq!(
            err,
            TemplateError::ArityMismatch {
                expected: 4,
                actual: 1
            }
        );
    }

    #[test]
    fn record_reproduces_renamed_program() {
        let record = extract("q", SAME_COLOR).unwrap();
        assert_eq!(
            record.program_text(),
            print_canonical(&rename_variables(&parse(SAME_COLOR).unwrap()))
        );
    }

    #[test]
    fn template_round_trips_through_text() {
        let record = extract("q", SAME_COLOR).unwrap();
        let again = Template::from_text(record.template.text()).unwrap();
        assert_eq!(again, record.template);
        assert_eq!(again.slot_count(), 4);
        assert_eq!(again.id(), record.template.id());
    }
}
