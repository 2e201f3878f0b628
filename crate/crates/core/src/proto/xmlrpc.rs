//! XML-RPC value model, codec and a blocking client over [`super::http`].

use std::net::SocketAddrV4;
use std::time::Duration;

use base64::Engine;
use quick_xml::events::Event;
use quick_xml::Reader;
use thiserror::Error;

use super::http::{self, HttpError, Request};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i32),
    Bool(bool),
    Str(String),
    Double(f64),
    DateTime(String),
    Base64(Vec<u8>),
    Array(Vec<Value>),
    Struct(Vec<(String, Value)>),
    Nil,
}

impl Value {
    pub fn as_i32(&self) -> Option<i32> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[Value]> {
        match self {
            Value::Array(a) => Some(a),
            _ => None,
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<i32> for Value {
    fn from(i: i32) -> Self {
        Value::Int(i)
    }
}

impl<T: Into<Value>> From<Vec<T>> for Value {
    fn from(items: Vec<T>) -> Self {
        Value::Array(items.into_iter().map(Into::into).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MethodResponse {
    Success(Value),
    Fault { code: i32, message: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum XmlRpcError {
    #[error("invalid XML: {0}")]
    Xml(String),
    #[error("not an XML-RPC document: {0}")]
    Shape(String),
}

#[derive(Debug, Error)]
pub enum CallError {
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("HTTP status {status}")]
    Status { status: u16, body: String },
    #[error(transparent)]
    Decode(#[from] XmlRpcError),
}

#[derive(Debug, Default)]
struct Element {
    name: String,
    text: String,
    children: Vec<Element>,
}

impl Element {
    fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    fn expect(&self, name: &str) -> Result<&Element, XmlRpcError> {
        self.child(name)
            .ok_or_else(|| XmlRpcError::Shape(format!("<{}> lacks <{name}>", self.name)))
    }
}

fn parse_tree(xml: &str) -> Result<Element, XmlRpcError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(false);
    let mut stack: Vec<Element> = vec![Element::default()];
    let err = |e: &dyn std::fmt::Display| XmlRpcError::Xml(e.to_string());
    loop {
        match reader.read_event().map_err(|e| err(&e))? {
            Event::Start(e) => stack.push(Element {
                name: String::from_utf8_lossy(e.name().as_ref()).into_owned(),
                ..Default::default()
            }),
            Event::Empty(e) => {
                let el = Element {
                    name: String::from_utf8_lossy(e.name().as_ref()).into_owned(),
                    ..Default::default()
                };
                stack.last_mut().expect("root").children.push(el);
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| err(&e))?;
                stack.last_mut().expect("root").text.push_str(&text);
            }
            Event::CData(c) => {
                let raw = c.into_inner();
                stack
                    .last_mut()
                    .expect("root")
                    .text
                    .push_str(&String::from_utf8_lossy(&raw));
            }
            Event::End(_) => {
                if stack.len() < 2 {
                    return Err(XmlRpcError::Xml("unbalanced end tag".into()));
                }
                let el = stack.pop().expect("checked");
                stack.last_mut().expect("root").children.push(el);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if stack.len() != 1 {
        return Err(XmlRpcError::Xml("unclosed element".into()));
    }
    let mut root = stack.pop().expect("root");
    match root.children.len() {
        1 => Ok(root.children.pop().expect("one child")),
        0 => Err(XmlRpcError::Xml("empty document".into())),
        _ => Err(XmlRpcError::Xml("multiple root elements".into())),
    }
}

fn decode_value(el: &Element) -> Result<Value, XmlRpcError> {
    let shape = |m: &str| XmlRpcError::Shape(m.to_string());
    let Some(inner) = el.children.first() else {
        // Untyped <value> is a string.
        return Ok(Value::Str(el.text.clone()));
    };
    let text = inner.text.trim();
    Ok(match inner.name.as_str() {
        "i4" | "int" | "i8" => Value::Int(text.parse().map_err(|_| shape("bad integer"))?),
        "boolean" => match text {
            "1" => Value::Bool(true),
            "0" => Value::Bool(false),
            _ => return Err(shape("bad boolean")),
        },
        "string" => Value::Str(inner.text.clone()),
        "double" => Value::Double(text.parse().map_err(|_| shape("bad double"))?),
        "dateTime.iso8601" => Value::DateTime(text.to_string()),
        "base64" => Value::Base64(
            base64::engine::general_purpose::STANDARD
                .decode(text)
                .map_err(|_| shape("bad base64"))?,
        ),
        "nil" => Value::Nil,
        "array" => {
            let data = inner.expect("data")?;
            Value::Array(
                data.children
                    .iter()
                    .filter(|c| c.name == "value")
                    .map(decode_value)
                    .collect::<Result<_, _>>()?,
            )
        }
        "struct" => Value::Struct(
            inner
                .children
                .iter()
                .filter(|c| c.name == "member")
                .map(|m| {
                    let name = m.expect("name")?.text.trim().to_string();
                    Ok((name, decode_value(m.expect("value")?)?))
                })
                .collect::<Result<_, XmlRpcError>>()?,
        ),
        other => return Err(XmlRpcError::Shape(format!("unknown type <{other}>"))),
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn encode_value(v: &Value, out: &mut String) {
    out.push_str("<value>");
    match v {
        Value::Int(i) => out.push_str(&format!("<int>{i}</int>")),
        Value::Bool(b) => out.push_str(&format!("<boolean>{}</boolean>", *b as u8)),
        Value::Str(s) => out.push_str(&format!("<string>{}</string>", escape(s))),
        Value::Double(d) => out.push_str(&format!("<double>{d}</double>")),
        Value::DateTime(s) => out.push_str(&format!(
            "<dateTime.iso8601>{}</dateTime.iso8601>",
            escape(s)
        )),
        Value::Base64(b) => out.push_str(&format!(
            "<base64>{}</base64>",
            base64::engine::general_purpose::STANDARD.encode(b)
        )),
        Value::Nil => out.push_str("<nil/>"),
        Value::Array(items) => {
            out.push_str("<array><data>");
            for item in items {
                encode_value(item, out);
            }
            out.push_str("</data></array>");
        }
        Value::Struct(members) => {
            out.push_str("<struct>");
            for (name, value) in members {
                out.push_str(&format!("<member><name>{}</name>", escape(name)));
                encode_value(value, out);
                out.push_str("</member>");
            }
            out.push_str("</struct>");
        }
    }
    out.push_str("</value>");
}

const PROLOG: &str = "<?xml version=\"1.0\"?>\n";

pub fn encode_call(method: &str, params: &[Value]) -> String {
    let mut out = format!(
        "{PROLOG}<methodCall><methodName>{}</methodName><params>",
        escape(method)
    );
    for p in params {
        out.push_str("<param>");
        encode_value(p, &mut out);
        out.push_str("</param>");
    }
    out.push_str("</params></methodCall>");
    out
}

pub fn encode_response(value: &Value) -> String {
    let mut out = format!("{PROLOG}<methodResponse><params><param>");
    encode_value(value, &mut out);
    out.push_str("</param></params></methodResponse>");
    out
}

pub fn encode_fault(code: i32, message: &str) -> String {
    let mut out = format!("{PROLOG}<methodResponse><fault>");
    encode_value(
        &Value::Struct(vec![
            ("faultCode".into(), Value::Int(code)),
            ("faultString".into(), Value::Str(message.to_string())),
        ]),
        &mut out,
    );
    out.push_str("</fault></methodResponse>");
    out
}

pub fn parse_call(xml: &str) -> Result<(String, Vec<Value>), XmlRpcError> {
    let root = parse_tree(xml)?;
    if root.name != "methodCall" {
        return Err(XmlRpcError::Shape(format!("root is <{}>", root.name)));
    }
    let method = root.expect("methodName")?.text.trim().to_string();
    let params = match root.child("params") {
        Some(p) => p
            .children
            .iter()
            .filter(|c| c.name == "param")
            .map(|c| decode_value(c.expect("value")?))
            .collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    Ok((method, params))
}

pub fn parse_response(xml: &str) -> Result<MethodResponse, XmlRpcError> {
    let root = parse_tree(xml)?;
    if root.name != "methodResponse" {
        return Err(XmlRpcError::Shape(format!("root is <{}>", root.name)));
    }
    if let Some(fault) = root.child("fault") {
        let value = decode_value(fault.expect("value")?)?;
        let Value::Struct(members) = value else {
            return Err(XmlRpcError::Shape("fault is not a struct".into()));
        };
        let field = |n: &str| members.iter().find(|(k, _)| k == n).map(|(_, v)| v);
        return Ok(MethodResponse::Fault {
            code: field("faultCode").and_then(Value::as_i32).unwrap_or(0),
            message: field("faultString")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
        });
    }
    let param = root.expect("params")?.expect("param")?;
    Ok(MethodResponse::Success(decode_value(
        param.expect("value")?,
    )?))
}

/// Performs one XML-RPC call against `http://addr/`.
pub fn call(
    addr: SocketAddrV4,
    method: &str,
    params: &[Value],
    timeout: Duration,
) -> Result<MethodResponse, CallError> {
    let request = Request::post("/", "text/xml", encode_call(method, params))
        .header("User-Agent", "robotrace-xmlrpc");
    let response = http::send(addr, &request, timeout)?;
    if response.status != 200 {
        return Err(CallError::Status {
            status: response.status,
            body: response.text(),
        });
    }
    Ok(parse_response(&response.text())?)
}
