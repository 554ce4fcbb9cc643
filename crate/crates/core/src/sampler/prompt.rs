//! Prompt templates, reproduced byte for byte.

use serde::{Deserialize, Serialize};

use super::Task;

pub const CATEGORICAL_SYSTEM: &str = "You are an emotion annotation assistant. Your task is to identify the
emotions expressed in a given text.

Available emotion labels (select ALL that apply):
admiration, amusement, anger, annoyance, approval, caring, confusion,
curiosity, desire, disappointment, disapproval, disgust, embarrassment,
excitement, fear, gratitude, grief, joy, love, nervousness, optimism,
pride, realization, relief, remorse, sadness, surprise, neutral

Rules:
- Select one or more emotions from the list above.
- If no specific emotion is expressed, select \"neutral\".
- Return ONLY a JSON array of selected emotion labels, nothing else.
- Example: [\"admiration\", \"joy\"]
- Example: [\"neutral\"]";

pub const CATEGORICAL_USER: &str = "What emotions are expressed in this text?

Text: \"{text}\"";

pub const VAD_SYSTEM: &str = "You are an emotion annotation assistant. Your task is to rate the
emotional content of a given text on three dimensions:
Valence (unpleasant to pleasant), Arousal (calm to excited), and
Dominance (submissive to dominant).

Rate each dimension on a scale from 1.0 to 5.0, where 3.0 is neutral.

Rules:
- Provide ratings from the READER's perspective
  (how the text makes you feel as a reader).
- Return ONLY a JSON object with three keys: \"V\", \"A\", \"D\"
- Each value must be a number between 1.0 and 5.0
- Example: {\"V\": 3.2, \"A\": 2.5, \"D\": 3.8}";

pub const VAD_USER: &str = "Rate the emotional content of this text on
Valence, Arousal, and Dominance (1.0-5.0):

Text: \"{text}\"";

const SLOT: &str = "{text}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

/// Substitute `text` into the user template verbatim. Quotes inside the
/// text are not escaped.
pub fn render_prompt(text: &str, task: Task) -> Prompt {
    let (system, user) = match task {
        Task::Categorical => (CATEGORICAL_SYSTEM, CATEGORICAL_USER),
        Task::Vad => (VAD_SYSTEM, VAD_USER),
    };
    Prompt {
        system: system.to_string(),
        user: user.replacen(SLOT, text, 1),
    }
}
