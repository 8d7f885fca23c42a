//! Extraction and validation of the JSON object an agent replies with.

use cdsim_core::agents::ScenarioView;
use cdsim_core::{ActionValue, GridCell, NodeSet, GRID_SIZE};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no JSON object found in reply")]
    NoObject,
    #[error("missing or malformed field `{0}`")]
    Field(&'static str),
    #[error("action out of bounds: {0}")]
    Bounds(String),
}

/// What a valid action looks like for the scenario at hand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionBounds {
    Grid,
    Nodes { budget: usize, node_count: usize },
    Contribution { c_max: f64 },
}

impl ActionBounds {
    pub fn for_view(view: &ScenarioView) -> Self {
        match view {
            ScenarioView::Disaster(_) => Self::Grid,
            ScenarioView::Info(v) => Self::Nodes { budget: v.budget, node_count: v.network.node_count() },
            ScenarioView::Public(v) => Self::Contribution { c_max: v.c_max },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentReply {
    pub analysis: String,
    pub action: ActionValue,
    pub message: String,
}

/// The first complete JSON object in `text`. Prose and code fences around it
/// are skipped because scanning starts at each `{` in turn.
pub fn first_json_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

fn int_list(v: &Value, field: &'static str) -> Result<Vec<i64>, ParseError> {
    v.as_array()
        .ok_or(ParseError::Field(field))?
        .iter()
        .map(|x| x.as_i64().or_else(|| x.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)))
        .collect::<Option<Vec<_>>>()
        .ok_or(ParseError::Field(field))
}

pub fn parse_agent_reply(text: &str, bounds: ActionBounds) -> Result<AgentReply, ParseError> {
    let obj = first_json_object(text).ok_or(ParseError::NoObject)?;
    let string = |k: &str| obj.get(k).and_then(Value::as_str).unwrap_or_default().to_string();
    let action = match bounds {
        ActionBounds::Grid => {
            let xy = int_list(obj.get("action").ok_or(ParseError::Field("action"))?, "action")?;
            let [x, y] = xy[..] else { return Err(ParseError::Field("action")) };
            let g = GRID_SIZE as i64;
            if !(0..g).contains(&x) || !(0..g).contains(&y) {
                return Err(ParseError::Bounds(format!("[{x},{y}] is outside the grid")));
            }
            ActionValue::Cell(GridCell { x: x as u8, y: y as u8 })
        }
        ActionBounds::Nodes { budget, node_count } => {
            let ids = int_list(obj.get("target_nodes").ok_or(ParseError::Field("target_nodes"))?, "target_nodes")?;
            if let Some(bad) = ids.iter().find(|&&n| n < 0 || n as usize >= node_count) {
                return Err(ParseError::Bounds(format!("node {bad} does not exist")));
            }
            let set = NodeSet::with_budget(ids.iter().map(|&n| n as u32), budget)
                .map_err(|e| ParseError::Bounds(e.to_string()))?;
            ActionValue::Nodes(set)
        }
        ActionBounds::Contribution { c_max } => {
            let x = obj.get("contribution").and_then(Value::as_f64).ok_or(ParseError::Field("contribution"))?;
            ActionValue::contribution(x, c_max).map_err(|e| ParseError::Bounds(e.to_string()))?
        }
    };
    Ok(AgentReply { analysis: string("analysis"), action, message: string("message") })
}
