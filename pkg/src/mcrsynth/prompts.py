"""Prompt templates for every agent, keyed by stage tag.

Each request is a system message describing the role plus one user message
holding the task instruction and a fenced JSON block of inputs.
"""

from __future__ import annotations

from collections.abc import Iterable
from typing import Any

from .gateway.payload import render_payload
from .gateway.types import ChatMessage, ChatRequest

SUMMARIZE = "catalog.summarize"
RERANK = "catalog.rerank"
SCENARIO_EXPAND = "scenario.expand"
BASIC_USER = "profile.basic_user"
SCREEN_TRIPLE = "profile.screen"
BACKSTORY = "profile.backstory"
REQUIREMENTS = "profile.requirements"
OUTFIT_DESCRIBE = "dialogue.outfit_describe"
OUTFIT_COMPAT = "dialogue.outfit_compat"
USER_OPEN = "dialogue.user_open"
ASSISTANT_OPEN = "dialogue.assistant_open"
USER_NEEDS = "dialogue.user_needs"
QUERIER_INTERESTS = "querier.interests"
QUERIER_CLARIFY = "querier.clarify"
CHATTER_RECOMMEND = "chatter.recommend"
CHATTER_CHITCHAT = "chatter.chitchat"
CHATTER_PROVIDE_TARGET = "chatter.provide_target"
USER_REACT = "user.react"
USER_ACCEPT = "user.accept"
USER_CHITCHAT = "user.chitchat"
REWRITE = "rewriter.rewrite"
SUPERVISE = "rewriter.supervise"
REVIEW = "reviewer.review"
REC_QUERY = "eval.rec_query"
JUDGE = "eval.judge"

ROLE_PLAY_TEMPERATURE = 0.1
REWRITE_TEMPERATURE = 0.85
SUPERVISION_TEMPERATURE = 0.1

STAGE_TEMPERATURES: dict[str, float] = {
    SCENARIO_EXPAND: 0.2,
    REWRITE: REWRITE_TEMPERATURE,
    SUPERVISE: SUPERVISION_TEMPERATURE,
    REVIEW: SUPERVISION_TEMPERATURE,
    JUDGE: SUPERVISION_TEMPERATURE,
}

COLLOQUIAL_INSTRUCTION = "Use colloquial expressions, the way people talk in casual chat."

_SHOP = "You work inside a clothing, shoes and jewelry store that holds real catalog products."

SYSTEM: dict[str, str] = {
    SUMMARIZE: "You write compact, factual product summaries for a retrieval database.",
    RERANK: _SHOP + " You pick the single product that best matches a shopper's needs.",
    SCENARIO_EXPAND: "You invent realistic everyday situations that make people shop for clothing.",
    BASIC_USER: "You create realistic, varied shopper personas.",
    SCREEN_TRIPLE: "You are a strict reviewer of synthetic shopper personas.",
    BACKSTORY: "You write short first-person-adjacent narratives about why someone is shopping.",
    REQUIREMENTS: "You extract concrete shopping requirements from a persona.",
    OUTFIT_DESCRIBE: "You are a stylist who suggests items that complete an outfit.",
    OUTFIT_COMPAT: "You are a stylist who judges whether two garments work together.",
    USER_OPEN: "You role-play a shopper talking to an online store assistant. Stay in character.",
    ASSISTANT_OPEN: _SHOP + " You are a friendly shopping assistant.",
    USER_NEEDS: "You role-play a shopper talking to an online store assistant. Stay in character.",
    QUERIER_INTERESTS: _SHOP + " You track what the shopper is looking for.",
    QUERIER_CLARIFY: _SHOP + " You translate vague wishes into concrete product attributes.",
    CHATTER_RECOMMEND: _SHOP + " You are a friendly shopping assistant.",
    CHATTER_CHITCHAT: _SHOP + " You are a friendly shopping assistant.",
    CHATTER_PROVIDE_TARGET: _SHOP + " You are a friendly shopping assistant.",
    USER_REACT: "You role-play a shopper judging a recommended product. Stay in character.",
    USER_ACCEPT: "You role-play a shopper who has found the right product. Stay in character.",
    USER_CHITCHAT: "You role-play a shopper chatting casually. Stay in character.",
    REWRITE: "You rewrite dialogue lines with fresh wording and sentence structure.",
    SUPERVISE: "You check that a rewritten dialogue line means exactly what the original meant.",
    REVIEW: "You review synthetic shopping conversations for quality.",
    REC_QUERY: "You are a shopping assistant that searches a product database.",
    JUDGE: "You evaluate multimodal shopping conversations.",
}

INSTRUCTION: dict[str, str] = {
    SUMMARIZE: (
        "Summarize the product from its title, description and image. Keep only the basic and "
        "visual attributes (type, color, material, cut, pattern, fit, notable details). Drop "
        "marketing language, shipping or warranty talk and repeated details. Reply with the "
        "summary text only, at most three sentences."),
    RERANK: (
        "The shopper's current interests are given below, followed by candidate products with "
        "their summaries; each candidate's image is attached in the same order. Choose the one "
        "candidate that fits best. Reply with JSON: {\"product_id\": <id of a listed candidate>}."),
    SCENARIO_EXPAND: (
        "Here are example shopping situations. Write new situations in the same style: one or "
        "two sentences each, concrete, and clearly different from the examples and from each "
        "other. Reply with JSON: {\"scenarios\": [<string>, ...]} containing exactly `count` items."),
    BASIC_USER: (
        "Create one shopper persona. Reply with JSON: {\"age\": <integer 13-100>, \"gender\": "
        "<string>, \"occupation\": <string>, \"notes\": <one sentence on taste or habits>}."),
    SCREEN_TRIPLE: (
        "Judge whether this combination is believable. First: would this user plausibly want "
        "this product? Second: does the product actually suit the situation? The product image "
        "is attached. Reply with JSON: {\"user_product_match\": <bool>, "
        "\"scenario_product_match\": <bool>, \"rationale\": <one sentence>}."),
    BACKSTORY: (
        "Write a purchase backstory of three to five sentences: who the user is, what is "
        "happening in their life according to the situation, and why they now want a product "
        "like this one. Do not name the exact product title. Reply with the backstory only."),
    REQUIREMENTS: (
        "From the persona, list (a) needs that come from the situation and (b) the concrete "
        "features the user wants in the target product, including visual ones such as color or "
        "pattern. Reply with JSON: {\"scenario_requirements\": [<string>, ...], "
        "\"target_requirements\": [<string>, ...]} with two to five short items each."),
    OUTFIT_DESCRIBE: (
        "The user will wear the target product in the situation below. Describe one other "
        "garment or accessory they might already own that would pair well with it. Reply with "
        "a one-sentence description usable as a search query."),
    OUTFIT_COMPAT: (
        "The first image is the user's target product, the second an item the user already "
        "owns. Do they coordinate well, and does the pair suit the situation? Reply with JSON: "
        "{\"compatible\": <bool>, \"reason\": <one sentence>}."),
    USER_OPEN: (
        "Start the conversation: greet the assistant and briefly say what situation you are "
        "shopping for. If an outfit item is given, its image is attached: say you own it and "
        "want something that goes with it. Do not reveal the exact product you have in mind. "
        "Reply with your message only."),
    ASSISTANT_OPEN: (
        "Respond to the shopper's opening: acknowledge the situation and ask one question about "
        "what matters most to them. Reply with your message only."),
    USER_NEEDS: (
        "Answer the assistant's question by describing the needs that come from your situation. "
        "Mention them naturally, without listing every detail. Reply with your message only."),
    QUERIER_INTERESTS: (
        "Read the whole conversation so far and list what the shopper currently wants, including "
        "what they rejected and why. Reply with JSON: {\"interests\": [<short phrase>, ...]}."),
    QUERIER_CLARIFY: (
        "Rewrite each interest as concrete, searchable product attributes (materials, colors, "
        "cuts, product types). Example: 'dries quickly' becomes 'polyester or modal fabric'. "
        "Reply with JSON: {\"needs\": [<attribute phrase>, ...]}."),
    CHATTER_RECOMMEND: (
        "Recommend the product below (its image is attached). Explain how its look and features "
        "fit what the shopper asked for, using that fit as the main selling point. Reply with "
        "your message only."),
    CHATTER_CHITCHAT: (
        "Reply to the shopper's last message with light, friendly small talk related to their "
        "situation, and show empathy. Do not recommend a product in this message. Reply with "
        "your message only."),
    CHATTER_PROVIDE_TARGET: (
        "Present this product (its image is attached) as the one that finally fits everything "
        "the shopper described. Reply with your message only."),
    USER_REACT: (
        "Compare the recommended product (text and attached image) with your target "
        "requirements. If any requirement is not met, reject it politely, naming the unmet "
        "requirement in your message. Otherwise accept it with thanks. Reply with JSON: "
        "{\"match\": <bool>, \"violated_requirement\": <exact text of one unmet requirement, or "
        "empty string>, \"utterance\": <your message>}."),
    USER_ACCEPT: (
        "The recommended product (image attached) is what you were looking for. Accept it and "
        "thank the assistant. Reply with your message only."),
    USER_CHITCHAT: (
        "Continue the small talk naturally, sharing a little about your situation. Reply with "
        "your message only."),
    REWRITE: (
        "Rewrite the line below with different wording and sentence structure. Keep every fact, "
        "product attribute, number and name exactly as they are. Reply with the new line only."),
    SUPERVISE: (
        "Compare the original and rewritten line. They must say the same thing, and every "
        "product attribute (type, color, material, size, price, name) must be unchanged. Reply "
        "with JSON: {\"consistent\": <bool>, \"reason\": <one sentence>}."),
    REVIEW: (
        "Score the conversation from 0 to 2 on three indicators: content_quality (informative, "
        "relevant, accurate), logical_fluency (each turn follows from the previous ones), "
        "user_consistency (the user behaves according to the profile). Reply with JSON: "
        "{\"content_quality\": <0-2>, \"logical_fluency\": <0-2>, \"user_consistency\": <0-2>, "
        "\"reason\": <one sentence>}."),
    REC_QUERY: (
        "Given the conversation so far, write one search query describing the product the "
        "assistant should recommend next. Reply with the query only."),
    JUDGE: (
        "Score the conversation from 0 to 2 on each dimension: natural (fluent, human-like), "
        "logical (turns follow from context), informative (rich, relevant details), "
        "pc_correlation (recommended products suit the user's situation), it_correspondence "
        "(text agrees with the attached product images). Reply with JSON: {\"natural\": <0-2>, "
        "\"logical\": <0-2>, \"informative\": <0-2>, \"pc_correlation\": <0-2>, "
        "\"it_correspondence\": <0-2>}."),
}


def temperature_for(tag: str) -> float:
    return STAGE_TEMPERATURES.get(tag, ROLE_PLAY_TEMPERATURE)


def build_request(
    tag: str,
    payload: dict[str, Any],
    *,
    images: Iterable[str] = (),
    seed: int | None = None,
    extra_instruction: str | None = None,
    temperature: float | None = None,
    max_output_tokens: int = 1024,
) -> ChatRequest:
    instruction = INSTRUCTION[tag]
    if extra_instruction:
        instruction = f"{instruction}\n{extra_instruction}"
    user = ChatMessage.text("user", f"{instruction}\n\n{render_payload(payload)}", images)
    return ChatRequest(
        messages=(ChatMessage.text("system", SYSTEM[tag]), user),
        tag=tag,
        temperature=temperature_for(tag) if temperature is None else temperature,
        max_output_tokens=max_output_tokens,
        seed=seed,
    )


def transcript(turns: Iterable[Any]) -> list[dict[str, str]]:
    """Turn list rendered for prompts; accepts Turn models or dicts."""
    out = []
    for t in turns:
        speaker = t["speaker"] if isinstance(t, dict) else t.speaker
        text = t["text"] if isinstance(t, dict) else t.text
        out.append({"speaker": speaker, "text": text})
    return out
