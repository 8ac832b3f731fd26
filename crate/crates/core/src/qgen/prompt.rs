//! Prompt templates for header extraction, question generation, and table
//! description.
//!
//! The serialized table is substituted at the `{table}` slot, which sits
//! inside angle brackets in every template. Whether the serialization carries
//! the table's title line is controlled per call: question quality differs
//! measurably when the generator can or cannot see titles, so the flag is
//! independent from the corpus-side embedding flag.

use crate::table::{to_markdown, PartialTable};

/// Full pipeline: extract key headers, then generate questions.
pub const FULL_PIPELINE_TEMPLATE: &str = r#"You are an expert in table data analysis. Given a table with its file name, sheet name, and a portion of its content (first ten rows), your task is to **extract key headers and generate questions** based on the table & headers.

Important Considerations:
- The table may contain nan or Unnamed: values, which represent empty merged cells in the original table. These **should not** be considered as meaningful data points or headers.
- The **true column headers may not always be in the first row or first column**. Carefully analyze the table to identify the correct headers.
- If the table has **multi-level headers**, preserve the hierarchical structure without merging or altering the text.
- If the table has an **irregular header structure** (such as key-value formatted headers where column names are listed separately), extract the correct header names accordingly.
- **Ignore rows that contain mostly empty values (nan, Unnamed:) or placeholders without meaningful data.**
- **Do not generate python code, extract headers and questions on your own.**
- The type of Questions could be one of (lookup, calculate, visualize, reasoning).
- **Generate question using the language of the table.**

Tasks:
1. **Extract Header Names:**
   - Identify the **true headers** by analyzing the structure of the table.
   - **Exclude** placeholder values like "nan" and "Unnamed:".
   - If the table contains **multi-level headers**, keep them as separate levels without merging.
   - If the table has **key-value headers**, extract the correct column names.
2. **Generate Questions (Context-Specific to the Table):**
   - Formulate **questions that can only be answered using this specific table**.
   - Ensure **each question involves 1 to 3 different headers** to capture interactions between data & columns.
   - Ensure the header diversity in all the questions.
   - Use '' to mark the headers in the question.
   - **Total number of questions should larger than the half number of extracted headers**

**Output Format (Strictly JSON format)**
Only return a JSON dictionary object with the extracted headers and questions, without any additional explanations or formatting.
{ "headers": ["header1", "header2", "..."], "questions": ["question1", "question2", "..."] }

Input Table:
<{table}>"#;

/// Questions only, without header extraction.
pub const QUESTIONS_ONLY_TEMPLATE: &str = r#"You are an expert in table data analysis. Given a table with its file name and a portion of its content (first ten rows), your task is to **generate questions** based on the table & headers.

Important Considerations:
- **Do not generate python code, generate questions on your own.**
- The type of Questions could be one of (Numerical, List, Count, Select).
- **Generate question using the language of the table.**

**Tasks:**
- **1. Generate Questions (Context-Specific to the Table):**
- Formulate **questions that can only be answered using this specific table**.
- Ensure **each question involves 1 to 3 different headers** to capture interactions between data & columns.
- Ensure the header diversity in all the questions.
- Use '' to mark the headers in the question.
- **Total number of questions should larger than the half number of extracted headers**

**Output Format (Strictly JSON format)**
Only return a JSON dictionary object with the extracted headers and questions, without any additional explanations or formatting.
{ "questions": ["question1", "question2", "..."] }

Input Table:
<{table}>"#;

/// Natural-language table summary, used by the description-based
/// representation strategies.
pub const DESCRIPTION_TEMPLATE: &str = r#"You are an expert in table data analysis. Given a table with its file name and a portion of its content (first ten rows), write a concise natural-language description of the table.

Important Considerations:
- Describe, in 2 to 4 sentences, what the table is about and what its columns contain.
- Do not list cell values exhaustively; summarize the content.
- Write the description using the language of the table.

**Output Format (Strictly JSON format)**
Only return a JSON dictionary object with the description, without any additional explanations or formatting.
{ "description": "..." }

Input Table:
<{table}>"#;

/// Which generation template to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    /// Header extraction plus question generation.
    FullPipeline,
    /// Question generation only (corpora where header extraction is skipped).
    QuestionsOnly,
}

/// Builds the generation prompt for a partial table.
pub fn build_prompt(pt: &PartialTable, mode: GenMode, include_title: bool) -> String {
    let template = match mode {
        GenMode::FullPipeline => FULL_PIPELINE_TEMPLATE,
        GenMode::QuestionsOnly => QUESTIONS_ONLY_TEMPLATE,
    };
    fill_table_slot(template, pt, include_title)
}

/// Builds the description prompt for a partial table.
pub fn build_description_prompt(pt: &PartialTable, include_title: bool) -> String {
    fill_table_slot(DESCRIPTION_TEMPLATE, pt, include_title)
}

fn fill_table_slot(template: &str, pt: &PartialTable, include_title: bool) -> String {
    template.replace("{table}", &to_markdown(pt, include_title))
}
