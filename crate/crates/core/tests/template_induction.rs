use envmap::annotator::{
    annotate_or_fallback, induce_template, AnnotationRequest, AnnotationResponse,
    HeuristicAnnotator, TemplateRequest,
};
use envmap::trace::ActionType;

#[test]
fn settings_and_profile_share_a_link_template() {
    let t = induce_template(&TemplateRequest {
        verb: ActionType::Click,
        element_role: Some("link".into()),
        instances: vec!["Click Settings".into(), "Click Profile".into()],
    });
    assert_eq!(t.template, "Click {link_text}");
    assert_eq!(t.parameter_name.as_deref(), Some("link_text"));
    let mut values = t.bindings.clone();
    values.sort();
    assert_eq!(values, ["Profile", "Settings"]);
}

#[test]
fn request_round_trips_through_the_contract() {
    let req = AnnotationRequest::InduceTemplate(TemplateRequest {
        verb: ActionType::Type,
        element_role: Some("textbox".into()),
        instances: vec![
            "Type tablet into Search".into(),
            "Type usb hub into Search".into(),
        ],
    });
    let AnnotationResponse::InduceTemplate(t) = annotate_or_fallback(&HeuristicAnnotator, &req)
    else {
        panic!("wrong response kind");
    };
    assert_eq!(t.template, "Type {textbox_text} into Search");
    assert_eq!(t.bindings, ["tablet", "usb hub"]);
}
