//! The six image-only prompt templates, stored verbatim.
//!
//! Templates carry no placeholders: the image is the only per-sample input.
//! Bump [`PROMPT_VERSION`] whenever a body changes so cached responses keyed
//! on the old text are not reused.

use crate::model::StrategyKind;

pub const PROMPT_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub strategy: StrategyKind,
    pub version: &'static str,
    pub body: &'static str,
}

pub fn render_prompt(strategy: StrategyKind) -> PromptTemplate {
    let body = match strategy {
        StrategyKind::ListOfObjects => LIST_OF_OBJECTS,
        StrategyKind::SimpleDescription => SIMPLE_DESCRIPTION,
        StrategyKind::StructuredDescription => STRUCTURED_DESCRIPTION,
        StrategyKind::RelationalMapping => RELATIONAL_MAPPING,
        StrategyKind::InconsistencyDetection => INCONSISTENCY_DETECTION,
        StrategyKind::SceneGraph => SCENE_GRAPH,
    };
    PromptTemplate {
        strategy,
        version: PROMPT_VERSION,
        body,
    }
}

const LIST_OF_OBJECTS: &str = r#"Analyze the image and list all clearly visible objects and elements. Return a comma-separated list of distinct, identifiable objects. Focus on physical objects, not interpretations or actions. Be specific but concise in naming objects."#;

const SIMPLE_DESCRIPTION: &str = r#"Describe this image in exactly two sentences. Return only the description, with no additional text or explanation."#;

const STRUCTURED_DESCRIPTION: &str = r#"Provide exactly two sentences about this image:
First sentence: State only the observable facts - who and what is in the image, and where it takes place. Focus solely on what can be directly seen.
Second sentence: Interpret the context - explain the likely purpose, situation, or story behind what's shown, including any relevant how or why elements.
Return only these two sentences, with no additional text."#;

const RELATIONAL_MAPPING: &str = r#"Analyze the spatial and interactive relationships between objects in this image. Return a JSON response with the following structure:

{
"objects": [
{
"id": "unique_number",
"name": "object_name",
"location": "general_location_in_image"
}
],
"relationships": [
{
"subject_id": "id_of_first_object",
"relation": "type_of_relationship",
"object_id": "id_of_second_object",
"confidence": "float_between_0_and_1"
}
]
}

Include ONLY clearly visible relationships. For each relationship, assign a confidence score."#;

const INCONSISTENCY_DETECTION: &str = r#"Analyze this image for potential manipulation indicators or inconsistencies. Return a JSON response structured as follows:

{
"lighting_analysis": {
"inconsistencies": [
{
"description": "Detailed description of the lighting inconsistency",
"location": "Where in the image this occurs",
"confidence": float between 0-1,
"affected_objects": ["list", "of", "affected", "objects"]
}],
"overall_lighting_coherence": float between 0-1
},
"perspective_analysis": {
"inconsistencies": [
{
"description": "Description of perspective or geometric anomaly",
"location": "Where in the image this occurs",
"confidence": float between 0-1,
"affected_objects": ["list", "of", "affected", "objects"]
}],
"overall_perspective_coherence": float between 0-1
},
"boundary_analysis": {
"suspicious_edges": [
{
"object": "Name of object",
"description": "Description of boundary anomaly",
"location": "Where in the image this occurs",
"confidence": float between 0-1
}],
"overall_edge_quality": float between 0-1
},
"resolution_analysis": {
"inconsistencies": [{
"object": "Name of object",
"description": "Description of resolution mismatch",
"relative_to": "What it's inconsistent with",
"confidence": float between 0-1
}],
"overall_resolution_coherence": float between 0-1
},
"metadata_analysis": {
"jpeg_artifacts": boolean,
"compression_inconsistencies": boolean,
"noise_patterns": ["list", "of", "suspicious", "patterns"]
},
"summary": {
"manipulation_likelihood": float between 0-1,
"most_suspicious_elements": ["list", "of", "concerning", "elements"],
"overall_assessment": "Brief summary of findings"}}

Focus on identifying concrete, observable inconsistencies rather than speculation. Provide specific locations and descriptions for each identified anomaly."#;

const SCENE_GRAPH: &str = r#"Analyze this image to create a detailed scene graph with metadata. Return a JSON response structured as follows:

{
"primary_subject": {
"description": "Detailed description of the main subject/focus",
"confidence": float between 0-1,
"typical_context": boolean,
"context_notes": "Explanation of context typicality"
},
"scene_elements": [
{
"object": "Name of the object or element",
"location": "Location in the image",
"confidence": float between 0-1,
"relationships": [
{
"related_to": "Name of the related object",
"relationship_type": "Type of relationship",
"confidence": float between 0-1,
"description": "Brief description of relationship"
}
],
"inconsistencies": [
{
"type": "Type of inconsistency",
"description": "Description of visual inconsistency",
"severity": float between 0-1
}]}],
"metadata_analysis": {
"image_quality": float between 0-1,
"quality_factors": {
"resolution": float between 0-1,
"clarity": float between 0-1,
"lighting": float between 0-1
},
"potential_manipulations": [...],
"technical_artifacts": [...]
},
"analysis_summary": {
"scene_complexity": float between 0-1,
"manipulation_likelihood": float between 0-1,
"overall_consistency": float between 0-1,
"key_observations": ["list", "of", "findings"]
}}

Focus on creating accurate relationships between elements and identifying any unusual or inconsistent aspects of the scene."#;
