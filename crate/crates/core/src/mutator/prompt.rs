use serde::{Deserialize, Serialize};

use crate::index::{Component, ComponentKind, MaskedSource};
use crate::tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    FunctionV1,
    ClassV1,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub component_id: String,
    pub template_id: TemplateId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("prompt for {component_id} needs {tokens} tokens, budget is {budget}")]
pub struct PromptTooLarge {
    pub component_id: String,
    pub tokens: usize,
    pub budget: usize,
}

const FUNCTION_V1: &str = "Given the code below, please implement the body of the function {function_name} directly without changing surrounding context.
{file_content_with_function_body_removed}
Answer in the following format:
<explain your implementation>
```
{function_signature}
    ... your code goes here ...
```
";

const CLASS_V1: &str = "Given the code below, please implement the body of the class {class_name} directly without changing surrounding context. Every method body of the class has been removed; write the complete class body, keeping its docstring, attributes and method signatures.
{file_content_with_class_body_removed}
Answer in the following format:
<explain your implementation>
```
{class_signature}
    ... your code goes here ...
```
";

/// Fill the template for `component`. `budget` is the provider's prompt
/// budget in tokens (ceil(bytes / 4)).
pub fn build_prompt(masked: &MaskedSource, component: &Component, budget: usize) -> Result<Prompt, PromptTooLarge> {
    let (template_id, text) = match component.kind {
        ComponentKind::Function | ComponentKind::Method => (
            TemplateId::FunctionV1,
            fill(
                FUNCTION_V1,
                &[
                    ("{function_name}", component.short_name()),
                    ("{file_content_with_function_body_removed}", &masked.text),
                    ("{function_signature}", &masked.preserved.signature),
                ],
            ),
        ),
        ComponentKind::Class => (
            TemplateId::ClassV1,
            fill(
                CLASS_V1,
                &[
                    ("{class_name}", component.short_name()),
                    ("{file_content_with_class_body_removed}", &masked.text),
                    ("{class_signature}", &masked.preserved.signature),
                ],
            ),
        ),
    };
    let needed = tokens::count(&text);
    if needed > budget {
        return Err(PromptTooLarge { component_id: component.id.clone(), tokens: needed, budget });
    }
    Ok(Prompt { text, component_id: component.id.clone(), template_id })
}

/// Single-pass slot substitution, so slot-like text inside the file content
/// is never expanded.
fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + slots.iter().map(|s| s.1.len()).sum::<usize>());
    let mut rest = template;
    'outer: while !rest.is_empty() {
        for (name, value) in slots {
            if let Some(after) = rest.strip_prefix(name) {
                out.push_str(value);
                rest = after;
                continue 'outer;
            }
        }
        let ch = rest.chars().next().expect("non-empty");
        out.push(ch);
        rest = &rest[ch.len_utf8()..];
    }
    out
}
