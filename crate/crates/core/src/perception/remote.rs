//! Blocking chat-completion client for live model endpoints.

use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::grammar::{request_answer, single_answer, AnswerLine};
use super::{
    Backend, BuildingBoxQuery, ChoiceAnswer, ChoiceQuery, FloorCountAnswer, FloorQuery, PerceptionError,
    RecognitionAnswer, RecognitionQuery, RequestInterpretation, RequestQuery, Role,
};
use crate::world::{DepthImage, PixelBox, View};

pub const PROMPT_VERSION: &str = "v1";

pub const ENV_URL: &str = "VLD_REMOTE_URL";
pub const ENV_TOKEN: &str = "VLD_REMOTE_TOKEN";

const REQUEST_PROMPT: &str = include_str!("../../assets/prompts/request.v1.txt");
const FLOOR_PROMPT: &str = include_str!("../../assets/prompts/floor.v1.txt");
const BUILDING_BOX_PROMPT: &str = include_str!("../../assets/prompts/building_box.v1.txt");
const RECOGNITION_PROMPT: &str = include_str!("../../assets/prompts/recognition.v1.txt");
const CHOICE_PROMPT: &str = include_str!("../../assets/prompts/choice.v1.txt");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub url: String,
    #[serde(skip_serializing)]
    pub token: Option<String>,
    pub model: String,
    pub timeout_secs: u64,
    /// Extra attempts after a grammar violation.
    pub retries: u32,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into(), token: None, model: "default".into(), timeout_secs: 60, retries: 2 }
    }

    /// Endpoint and token from `VLD_REMOTE_URL` / `VLD_REMOTE_TOKEN`.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(ENV_URL).ok()?;
        let mut c = Self::new(url);
        c.token = std::env::var(ENV_TOKEN).ok();
        Some(c)
    }
}

/// Moves one request body to an endpoint and returns the reply text.
pub trait Transport {
    fn complete(&mut self, body: &Value) -> Result<String, PerceptionError>;
}

#[derive(Debug)]
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    token: Option<String>,
}

impl HttpTransport {
    pub fn new(cfg: &RemoteConfig) -> Self {
        let agent =
            ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(cfg.timeout_secs))).build().into();
        Self { agent, url: cfg.url.clone(), token: cfg.token.clone() }
    }
}

impl Transport for HttpTransport {
    fn complete(&mut self, body: &Value) -> Result<String, PerceptionError> {
        let mut req = self.agent.post(&self.url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let transport = |e: ureq::Error| PerceptionError::Transport(e.to_string());
        let reply: Value = req.send_json(body).map_err(transport)?.body_mut().read_json().map_err(transport)?;
        reply_text(&reply).ok_or_else(|| PerceptionError::Transport("reply carries no message content".into()))
    }
}

/// Assistant text of a chat-completion reply.
pub fn reply_text(v: &Value) -> Option<String> {
    let content = v
        .pointer("/choices/0/message/content")
        .or_else(|| v.pointer("/message/content"))
        .or_else(|| v.get("content"))?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => {
            let text: Vec<&str> = parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect();
            (!text.is_empty()).then(|| text.join("\n"))
        }
        _ => None,
    }
}

/// 8-bit grayscale PNG of a range image; near is bright, no-hit is black.
pub fn depth_png(img: &DepthImage) -> Vec<u8> {
    let px: Vec<u8> =
        img.data.iter().map(|&r| (255.0 * (1.0 - (r / img.max_range).clamp(0.0, 1.0))).round() as u8).collect();
    gray_png(img.width, img.height, &px)
}

fn gray_png(width: usize, height: usize, px: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(px).expect("in-memory PNG data");
    }
    out
}

/// Views joined left to right in the given order.
fn composite(images: &[&DepthImage]) -> Vec<u8> {
    let (w, h) = (images[0].width, images[0].height);
    let total = w * images.len();
    let mut px = vec![0u8; total * h];
    for (k, img) in images.iter().enumerate() {
        for j in 0..h {
            for i in 0..w {
                let r = img.get(i, j);
                px[j * total + k * w + i] = (255.0 * (1.0 - (r / img.max_range).clamp(0.0, 1.0))).round() as u8;
            }
        }
    }
    gray_png(total, h, &px)
}

fn marked(img: &DepthImage, marks: &[usize; 5]) -> Vec<u8> {
    let mut px: Vec<u8> =
        img.data.iter().map(|&r| (255.0 * (1.0 - (r / img.max_range).clamp(0.0, 1.0))).round() as u8).collect();
    let row = img.height / 2;
    for &c in marks {
        for dj in -2i64..=2 {
            for di in -2i64..=2 {
                if di != 0 && dj != 0 {
                    continue;
                }
                let (x, y) = (c as i64 + di, row as i64 + dj);
                if (0..img.width as i64).contains(&x) && (0..img.height as i64).contains(&y) {
                    px[y as usize * img.width + x as usize] = 255;
                }
            }
        }
    }
    gray_png(img.width, img.height, &px)
}

/// Chat-completion request body with a text part and an optional image.
pub fn request_body(model: &str, prompt: &str, image_png: Option<&[u8]>) -> Value {
    let mut content = vec![json!({"type": "text", "text": prompt})];
    if let Some(png) = image_png {
        let b64 = base64::engine::general_purpose::STANDARD.encode(png);
        content.push(json!({"type": "image", "image": format!("data:image/png;base64,{b64}")}));
    }
    json!({"model": model, "messages": [{"role": "user", "content": content}]})
}

/// Backend that forwards every role to a remote model.
pub struct RemoteBackend<T: Transport = HttpTransport> {
    transport: T,
    model: String,
    retries: u32,
}

impl RemoteBackend<HttpTransport> {
    pub fn new(cfg: &RemoteConfig) -> Self {
        Self { transport: HttpTransport::new(cfg), model: cfg.model.clone(), retries: cfg.retries }
    }
}

impl<T: Transport> RemoteBackend<T> {
    pub fn with_transport(transport: T, model: impl Into<String>, retries: u32) -> Self {
        Self { transport, model: model.into(), retries }
    }

    /// Sends `body` until `parse` accepts the reply or retries run out.
    fn ask<A>(
        &mut self,
        role: Role,
        body: &Value,
        mut parse: impl FnMut(&str) -> Result<A, String>,
    ) -> Result<A, PerceptionError> {
        let mut last = String::new();
        for _ in 0..=self.retries {
            let reply = self.transport.complete(body)?;
            match parse(&reply) {
                Ok(a) => return Ok(a),
                Err(e) => last = e,
            }
        }
        Err(PerceptionError::Grammar(format!("{role:?} reply rejected after {} attempts: {last}", self.retries + 1)))
    }
}

impl<T: Transport> Backend for RemoteBackend<T> {
    fn parse_request(&mut self, q: RequestQuery<'_>) -> Result<RequestInterpretation, PerceptionError> {
        let prompt = REQUEST_PROMPT.replace("{request}", q.text);
        let body = request_body(&self.model, &prompt, None);
        let (floor, object) = self.ask(Role::Request, &body, request_answer)?;
        let target_floor = u32::try_from(floor).map_err(|_| PerceptionError::Grammar(format!("floor {floor}")))?;
        Ok(RequestInterpretation { target_floor, target_object: object })
    }

    fn count_floors(&mut self, q: FloorQuery<'_>) -> Result<FloorCountAnswer, PerceptionError> {
        let body = request_body(&self.model, FLOOR_PROMPT, Some(&depth_png(q.depth)));
        let parsed = self.ask(Role::Floor, &body, |r| match single_answer(r, &["ANSWER", "NONE"])? {
            AnswerLine::Answer(n) if n >= 0 => Ok(FloorCountAnswer::count(n as u32)),
            AnswerLine::None => Ok(FloorCountAnswer::refusal()),
            _ => Err("negative floor count".into()),
        });
        match parsed {
            Err(PerceptionError::Grammar(_)) => Ok(FloorCountAnswer::refusal()),
            other => other,
        }
    }

    fn building_box(&mut self, q: BuildingBoxQuery<'_>) -> Result<Option<PixelBox>, PerceptionError> {
        let (w, h) = (q.depth.width, q.depth.height);
        let prompt = BUILDING_BOX_PROMPT.replace("{width}", &w.to_string()).replace("{height}", &h.to_string());
        let body = request_body(&self.model, &prompt, Some(&depth_png(q.depth)));
        let parsed = self.ask(Role::Floor, &body, |r| match single_answer(r, &["BOX", "NONE"])? {
            AnswerLine::Box(b) => {
                let b = PixelBox::from(b);
                if b.within(w, h) {
                    Ok(Some(b))
                } else {
                    Err(format!("box {b:?} outside the image"))
                }
            }
            _ => Ok(None),
        });
        match parsed {
            Err(PerceptionError::Grammar(_)) => Ok(None),
            other => other,
        }
    }

    fn recognize(&mut self, q: RecognitionQuery<'_>) -> Result<RecognitionAnswer, PerceptionError> {
        let mut views: Vec<_> = q.views.iter().collect();
        views.sort_by_key(|v| v.view);
        let Some(first) = views.first() else {
            return Ok(RecognitionAnswer::not_found());
        };
        let (w, h) = (first.depth.width, first.depth.height);
        let prompt = RECOGNITION_PROMPT
            .replace("{width}", &w.to_string())
            .replace("{height}", &h.to_string())
            .replace("{object}", &q.target.description());
        let images: Vec<&DepthImage> = views.iter().map(|v| &v.depth).collect();
        let body = request_body(&self.model, &prompt, Some(&composite(&images)));
        let order: Vec<View> = views.iter().map(|v| v.view).collect();
        let parsed = self.ask(Role::Recognition, &body, |r| match single_answer(r, &["BOX", "NONE"])? {
            AnswerLine::Box([x0, x1, y0, y1]) => {
                let slot = x0 / w;
                if slot >= order.len() || x1 / w != slot || y1 >= h {
                    return Err("box does not lie inside one view".into());
                }
                let b = PixelBox { x_min: x0 - slot * w, x_max: x1 - slot * w, y_min: y0, y_max: y1 };
                Ok(RecognitionAnswer::found(order[slot], b, None))
            }
            _ => Ok(RecognitionAnswer::not_found()),
        });
        match parsed {
            Err(PerceptionError::Grammar(_)) => Ok(RecognitionAnswer::not_found()),
            other => other,
        }
    }

    fn choose(&mut self, q: ChoiceQuery<'_>) -> Result<ChoiceAnswer, PerceptionError> {
        let distances: Vec<String> =
            q.distances.iter().enumerate().map(|(k, d)| format!("{}: {d:.1}", k + 1)).collect();
        let prompt = CHOICE_PROMPT.replace("{task}", q.task).replace("{distances}", &distances.join(", "));
        let body = request_body(&self.model, &prompt, Some(&marked(q.depth, &q.marks)));
        self.ask(Role::Choice, &body, |r| match single_answer(r, &["POINT"])? {
            AnswerLine::Point(k) => Ok(ChoiceAnswer { point_index: k }),
            _ => Err("expected POINT".into()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    struct Scripted {
        replies: VecDeque<String>,
        sent: Vec<Value>,
    }

    impl Scripted {
        fn new(replies: &[&str]) -> Self {
            Self { replies: replies.iter().map(|s| s.to_string()).collect(), sent: Vec::new() }
        }
    }

    impl Transport for Scripted {
        fn complete(&mut self, body: &Value) -> Result<String, PerceptionError> {
            self.sent.push(body.clone());
            self.replies.pop_front().ok_or_else(|| PerceptionError::Transport("script exhausted".into()))
        }
    }

    fn depth() -> DepthImage {
        DepthImage::filled(16, 16, 100.0, 12.0)
    }

    #[test]
    fn floor_answer_parsed() {
        let mut b = RemoteBackend::with_transport(Scripted::new(&["ANSWER: 4"]), "m", 2);
        let d = depth();
        let a = b.count_floors(FloorQuery { depth: &d, band: None }).unwrap();
        assert_eq!(a, FloorCountAnswer::count(4));
        let body = &b.transport.sent[0];
        assert_eq!(body["model"], "m");
        assert_eq!(body["messages"][0]["content"][0]["type"], "text");
        assert_eq!(body["messages"][0]["content"][1]["type"], "image");
    }

    #[test]
    fn grammar_failure_becomes_refusal() {
        let script = ["I think maybe...", "I think maybe...", "I think maybe..."];
        let mut b = RemoteBackend::with_transport(Scripted::new(&script), "m", 2);
        let d = depth();
        let a = b.count_floors(FloorQuery { depth: &d, band: None }).unwrap();
        assert!(a.refused());
        assert_eq!(b.transport.sent.len(), 3);
    }

    #[test]
    fn out_of_range_point_is_an_error() {
        let mut b = RemoteBackend::with_transport(Scripted::new(&["POINT: 6"]), "m", 0);
        let d = depth();
        let q = ChoiceQuery {
            view: View::RIGHT,
            depth: &d,
            marks: [3, 5, 8, 11, 13],
            distances: [5.0; 5],
            deadlock_threshold: 1.0,
            task: "find the green flower pot",
            gains: None,
        };
        assert!(matches!(b.choose(q), Err(PerceptionError::Grammar(_))));
    }

    #[test]
    fn recognition_box_maps_to_view() {
        let views: Vec<super::super::ViewObservation> = View::ALL
            .iter()
            .map(|&v| super::super::ViewObservation { view: v, depth: depth(), features: vec![] })
            .collect();
        let target = crate::world::ObjectTag::parse_description("green flower pot").unwrap();
        // third slot of the joined image is the right view
        let mut b = RemoteBackend::with_transport(Scripted::new(&["BOX: 35 40 2 9"]), "m", 0);
        let a = b.recognize(RecognitionQuery { views: &views, target: &target }).unwrap();
        assert_eq!(a.view, Some(View::RIGHT));
        assert_eq!(a.pixel_box, Some(PixelBox { x_min: 3, x_max: 8, y_min: 2, y_max: 9 }));
    }

    #[test]
    fn reply_text_shapes() {
        let v = json!({"choices": [{"message": {"content": "POINT: 2"}}]});
        assert_eq!(reply_text(&v).as_deref(), Some("POINT: 2"));
        let v = json!({"choices": [{"message": {"content": [{"type": "text", "text": "NONE"}]}}]});
        assert_eq!(reply_text(&v).as_deref(), Some("NONE"));
        assert_eq!(reply_text(&json!({"error": "x"})), None);
    }

    #[test]
    fn png_has_signature() {
        let png = depth_png(&depth());
        assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
    }
}
