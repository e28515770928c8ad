//! Protocol definition ingestion: field units (γ) and frame control
//! relationships (Σ) from a MAVLink-style XML file.

use std::collections::{BTreeMap, BTreeSet};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

use crate::units::{parse_unit_string, FrameSpec, UnitError, UnitType};

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("malformed protocol at byte {offset}: {message}")]
    MalformedProtocol { offset: u64, message: String },
    #[error("field `{field}` of message `{message}`: {source}")]
    Unit {
        message: String,
        field: String,
        #[source]
        source: UnitError,
    },
}

/// `control_field = control_value ⟹ target_field : implied_type`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlRelation {
    pub control_field: String,
    pub control_value: String,
    pub target_field: String,
    pub implied_type: UnitType,
}

/// One field as declared, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub name: String,
    pub units: Option<String>,
    pub is_frame: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageDef {
    pub id: u32,
    pub name: String,
    pub fields: Vec<FieldDef>,
    pub field_units: BTreeMap<String, UnitType>,
    pub control_relations: Vec<ControlRelation>,
}

impl MessageDef {
    /// Name of the struct generated for this message.
    pub fn struct_name(&self) -> String {
        struct_name_for(&self.name)
    }

    pub fn frame_fields(&self) -> impl Iterator<Item = &str> {
        self.fields
            .iter()
            .filter(|f| f.is_frame)
            .map(|f| f.name.as_str())
    }

    pub fn is_frame_field(&self, field: &str) -> bool {
        self.fields.iter().any(|f| f.is_frame && f.name == field)
    }

    /// True when some frame field controls `field`.
    pub fn is_controlled(&self, field: &str) -> bool {
        let target = format!("{}.{}", self.struct_name(), field);
        self.control_relations
            .iter()
            .any(|r| r.target_field == target)
    }

    /// Frames that `control_field` may select for `field`.
    pub fn controlled_frames(&self, field: &str) -> BTreeSet<String> {
        let target = format!("{}.{}", self.struct_name(), field);
        self.control_relations
            .iter()
            .filter(|r| r.target_field == target)
            .map(|r| r.control_value.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProtocolModel {
    pub messages: BTreeMap<String, MessageDef>,
    pub frame_universe: BTreeSet<String>,
}

/// `VISION_SPEED_ESTIMATE` → `vision_speed_estimate_t`.
pub fn struct_name_for(message: &str) -> String {
    format!("{}_t", message.to_ascii_lowercase())
}

impl ProtocolModel {
    /// Message backing a struct type name; a `mavlink_` prefix is accepted.
    pub fn message_for_struct(&self, struct_name: &str) -> Option<&MessageDef> {
        let base = struct_name.strip_prefix("mavlink_").unwrap_or(struct_name);
        let msg = base.strip_suffix("_t")?;
        self.messages
            .get(&msg.to_ascii_uppercase())
            .filter(|m| m.struct_name() == base)
    }

    /// Uncontrolled unit of `struct_name.field`.
    pub fn lookup_field_unit(&self, struct_name: &str, field: &str) -> Option<UnitType> {
        self.message_for_struct(struct_name)?
            .field_units
            .get(field)
            .cloned()
    }

    /// Frame a controlled field has when no refinement applies: any of the
    /// frames its control field may select.
    pub fn default_frame(&self, struct_name: &str, field: &str) -> FrameSpec {
        match self.message_for_struct(struct_name) {
            Some(m) if m.is_controlled(field) => {
                FrameSpec::from_set(m.controlled_frames(field)).unwrap_or(FrameSpec::Any)
            }
            _ => FrameSpec::Any,
        }
    }
}

fn malformed(reader: &Reader<&[u8]>, message: impl Into<String>) -> ProtocolError {
    ProtocolError::MalformedProtocol {
        offset: reader.buffer_position(),
        message: message.into(),
    }
}

fn attr(
    reader: &Reader<&[u8]>,
    e: &BytesStart<'_>,
    key: &str,
) -> Result<Option<String>, ProtocolError> {
    for a in e.attributes() {
        let a = a.map_err(|err| malformed(reader, err.to_string()))?;
        if a.key.as_ref() == key.as_bytes() {
            let v = a
                .unescape_value()
                .map_err(|err| malformed(reader, err.to_string()))?;
            return Ok(Some(v.trim().to_string()));
        }
    }
    Ok(None)
}

struct RawMessage {
    id: u32,
    name: String,
    fields: Vec<FieldDef>,
}

/// Parses protocol XML into a [`ProtocolModel`].
pub fn parse_protocol(xml_text: &str) -> Result<ProtocolModel, ProtocolError> {
    let mut reader = Reader::from_str(xml_text);
    reader.config_mut().trim_text(true);

    let mut stack: Vec<String> = Vec::new();
    let mut universe = BTreeSet::new();
    let mut in_frames_enum = false;
    let mut raw: Vec<RawMessage> = Vec::new();
    let mut saw_root = false;

    loop {
        let event = reader
            .read_event()
            .map_err(|e| malformed(&reader, e.to_string()))?;
        let (e, empty) = match &event {
            Event::Start(e) => (e.clone(), false),
            Event::Empty(e) => (e.clone(), true),
            Event::End(_) => {
                if stack.pop().as_deref() == Some("enum") {
                    in_frames_enum = false;
                }
                continue;
            }
            Event::Eof => break,
            Event::Text(_)
            | Event::CData(_)
            | Event::Comment(_)
            | Event::Decl(_)
            | Event::PI(_) => continue,
            Event::DocType(_) => continue,
        };
        let tag = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let parent = stack.last().map(String::as_str);
        match (parent, tag.as_str()) {
            (None, "mavlink") if !saw_root => saw_root = true,
            (Some("mavlink"), "enums") | (Some("mavlink"), "messages") => {}
            (Some("enums"), "enum") => {
                in_frames_enum = attr(&reader, &e, "name")?.as_deref() == Some("frames");
            }
            (Some("enum"), "entry") => {
                let name = attr(&reader, &e, "name")?
                    .ok_or_else(|| malformed(&reader, "enum entry without name"))?;
                if in_frames_enum {
                    universe.insert(name);
                }
            }
            (Some("enum"), "description") | (Some("entry"), "description") => {}
            (Some("messages"), "msg") => {
                let name = attr(&reader, &e, "name")?
                    .ok_or_else(|| malformed(&reader, "msg without name"))?;
                let id = attr(&reader, &e, "id")?
                    .ok_or_else(|| malformed(&reader, format!("msg `{name}` without id")))?
                    .parse::<u32>()
                    .map_err(|_| {
                        malformed(&reader, format!("msg `{name}` has a non-numeric id"))
                    })?;
                raw.push(RawMessage {
                    id,
                    name,
                    fields: Vec::new(),
                });
            }
            (Some("msg"), "description") => {}
            (Some("msg"), "field") => {
                let name = attr(&reader, &e, "name")?
                    .ok_or_else(|| malformed(&reader, "field without name"))?;
                let units = attr(&reader, &e, "units")?.filter(|u| !u.is_empty());
                let is_frame = attr(&reader, &e, "type")?.as_deref() == Some("frame");
                let msg = raw.last_mut().expect("msg on stack");
                if msg.fields.iter().any(|f| f.name == name) {
                    return Err(malformed(
                        &reader,
                        format!("duplicate field `{name}` in `{}`", msg.name),
                    ));
                }
                msg.fields.push(FieldDef {
                    name,
                    units,
                    is_frame,
                });
            }
            (_, other) => {
                return Err(malformed(&reader, format!("unexpected element <{other}>")));
            }
        }
        if !empty {
            stack.push(tag);
        }
    }
    if !saw_root {
        return Err(malformed(&reader, "missing <mavlink> root"));
    }
    if !stack.is_empty() {
        return Err(malformed(&reader, "unclosed element"));
    }
    build_model(raw, universe)
}

fn build_model(
    raw: Vec<RawMessage>,
    universe: BTreeSet<String>,
) -> Result<ProtocolModel, ProtocolError> {
    let mut messages = BTreeMap::new();
    let mut ids = BTreeSet::new();
    for m in raw {
        let dup = |what: String| ProtocolError::MalformedProtocol {
            offset: 0,
            message: what,
        };
        if !ids.insert(m.id) {
            return Err(dup(format!("duplicate message id {}", m.id)));
        }
        if messages.contains_key(&m.name) {
            return Err(dup(format!("duplicate message `{}`", m.name)));
        }
        let mut field_units = BTreeMap::new();
        for f in m.fields.iter().filter(|f| !f.is_frame) {
            if let Some(u) = &f.units {
                let t = parse_unit_string(u).map_err(|source| ProtocolError::Unit {
                    message: m.name.clone(),
                    field: f.name.clone(),
                    source,
                })?;
                field_units.insert(f.name.clone(), t);
            }
        }
        let struct_name = struct_name_for(&m.name);
        let mut control_relations = Vec::new();
        for ctrl in m.fields.iter().filter(|f| f.is_frame) {
            if universe.is_empty() {
                return Err(dup(format!(
                    "frame field `{}.{}` but no frames enum",
                    m.name, ctrl.name
                )));
            }
            for value in &universe {
                for (target, unit) in &field_units {
                    control_relations.push(ControlRelation {
                        control_field: format!("{struct_name}.{}", ctrl.name),
                        control_value: value.clone(),
                        target_field: format!("{struct_name}.{target}"),
                        implied_type: unit.with_frame(FrameSpec::concrete(value.clone())),
                    });
                }
            }
        }
        messages.insert(
            m.name.clone(),
            MessageDef {
                id: m.id,
                name: m.name,
                fields: m.fields,
                field_units,
                control_relations,
            },
        );
    }
    Ok(ProtocolModel {
        messages,
        frame_universe: universe,
    })
}
