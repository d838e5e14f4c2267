//! Strict answer grammar for remote replies. Exactly one line of the reply
//! must be an answer line; surrounding reasoning text is ignored.
//!
//! ```text
//! ANSWER: <int>
//! BOX: <x0> <x1> <y0> <y1>
//! POINT: <1-5>
//! OBJECT: <color> <label>
//! NONE
//! ```

use crate::world::ObjectTag;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnswerLine {
    Answer(i64),
    Box([usize; 4]),
    Point(u8),
    Object(ObjectTag),
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Keyword {
    Answer,
    Box,
    Point,
    Object,
    None,
}

impl Keyword {
    fn of(line: &str) -> Option<Keyword> {
        if line == "NONE" {
            return Some(Keyword::None);
        }
        let (head, _) = line.split_once(':')?;
        match head {
            "ANSWER" => Some(Keyword::Answer),
            "BOX" => Some(Keyword::Box),
            "POINT" => Some(Keyword::Point),
            "OBJECT" => Some(Keyword::Object),
            _ => None,
        }
    }
}

fn parse_line(line: &str, kw: Keyword) -> Result<AnswerLine, String> {
    let body = line.split_once(':').map_or("", |(_, b)| b.trim());
    match kw {
        Keyword::None => Ok(AnswerLine::None),
        Keyword::Answer => {
            body.parse::<i64>().map(AnswerLine::Answer).map_err(|_| format!("ANSWER expects an integer, got {body:?}"))
        }
        Keyword::Point => match body.parse::<u8>() {
            Ok(k @ 1..=5) => Ok(AnswerLine::Point(k)),
            _ => Err(format!("POINT expects 1-5, got {body:?}")),
        },
        Keyword::Box => {
            let nums: Result<Vec<usize>, _> = body.split_whitespace().map(str::parse::<usize>).collect();
            match nums {
                Ok(v) if v.len() == 4 && v[0] < v[1] && v[2] < v[3] => Ok(AnswerLine::Box([v[0], v[1], v[2], v[3]])),
                _ => Err(format!("BOX expects x0 < x1 and y0 < y1, got {body:?}")),
            }
        }
        Keyword::Object => ObjectTag::parse_description(body)
            .map(AnswerLine::Object)
            .ok_or_else(|| format!("OBJECT names no known color and label: {body:?}")),
    }
}

/// All answer lines of a reply, in order. Lines with a keyword but a
/// malformed body are errors.
pub fn answer_lines(reply: &str) -> Result<Vec<AnswerLine>, String> {
    let mut out = Vec::new();
    for raw in reply.lines() {
        let line = raw.trim();
        if let Some(kw) = Keyword::of(line) {
            out.push(parse_line(line, kw)?);
        }
    }
    Ok(out)
}

/// The single answer line of a reply, required to be one of `allowed`.
pub fn single_answer(reply: &str, allowed: &[&str]) -> Result<AnswerLine, String> {
    let lines = answer_lines(reply)?;
    match lines.as_slice() {
        [only] if allowed.contains(&kind(only)) => Ok(only.clone()),
        [only] => Err(format!("unexpected {} answer", kind(only))),
        [] => Err("no answer line".into()),
        _ => Err(format!("{} answer lines, expected one", lines.len())),
    }
}

/// Request replies carry one ANSWER and one OBJECT line.
pub fn request_answer(reply: &str) -> Result<(i64, ObjectTag), String> {
    let lines = answer_lines(reply)?;
    let mut floor = None;
    let mut object = None;
    for l in lines {
        match l {
            AnswerLine::Answer(n) if floor.is_none() => floor = Some(n),
            AnswerLine::Object(t) if object.is_none() => object = Some(t),
            other => return Err(format!("unexpected or repeated {} line", kind(&other))),
        }
    }
    match (floor, object) {
        (Some(f), Some(o)) if f >= 1 => Ok((f, o)),
        (Some(f), Some(_)) => Err(format!("target floor {f} below 1")),
        _ => Err("request reply needs ANSWER and OBJECT lines".into()),
    }
}

fn kind(l: &AnswerLine) -> &'static str {
    match l {
        AnswerLine::Answer(_) => "ANSWER",
        AnswerLine::Box(_) => "BOX",
        AnswerLine::Point(_) => "POINT",
        AnswerLine::Object(_) => "OBJECT",
        AnswerLine::None => "NONE",
    }
}
