"""Simulated agents behind the offline mock provider.

One handler per stage tag.  Handlers read the structured inputs of the
prompt, draw from a seeded RNG and return text shaped like a real model's
reply.  The phrasing is deliberately template-bound, which mimics the
repetitive wording of low-temperature generation; the rewriter handler
perturbs wording so diversity metrics respond to it.
"""

from __future__ import annotations

import json
import random
import re
from typing import Any

from . import prompts as P
from . import vocab
from .gateway.mock import MockCall

# ---------------------------------------------------------------------------
# helpers


def _json_reply(call: MockCall, obj: dict[str, Any]) -> str:
    body = json.dumps(obj, ensure_ascii=False)
    if call.rng.random() < call.behaviour.prose_wrap_rate:
        return f"Sure, here is my answer.\n```json\n{body}\n```"
    return body


def _pick(rng: random.Random, options: list[str]) -> str:
    return options[rng.randrange(len(options))]


def _product_phrase(summary: str, rng: random.Random | None = None) -> str:
    attrs = vocab.attributes(summary)
    bits = attrs["color"][:1] + attrs["material"][:1] + attrs["garment"][:1]
    return " ".join(bits) if bits else "piece"


def _last(turns: list[dict[str, str]], speaker: str) -> str:
    for t in reversed(turns):
        if t.get("speaker") == speaker:
            return t.get("text", "")
    return ""


# ---------------------------------------------------------------------------
# catalog


def summarize(call: MockCall) -> str:
    p = call.payload
    text = f"{p.get('title', '')}. {p.get('description', '')}"
    attrs = vocab.attributes(text)
    garment = (attrs["garment"] or ["item"])[0]
    parts = []
    lead = " ".join(attrs["color"][:1] + attrs["pattern"][:1] + attrs["material"][:1] + [garment])
    parts.append(f"A {lead}.")
    if attrs["style"]:
        parts.append(f"It has a {' and '.join(attrs['style'][:2])} design.")
    category = (p.get("categories") or [""])[0]
    if category:
        parts.append(f"Category: {category.lower()}.")
    return " ".join(parts)


def rerank(call: MockCall) -> str:
    candidates = call.payload.get("candidates") or []
    if not candidates:
        return _json_reply(call, {"product_id": ""})
    if call.rng.random() < call.behaviour.rerank_top1_rate:
        choice = candidates[0]
    else:
        choice = candidates[call.rng.randrange(len(candidates))]
    return _json_reply(call, {"product_id": choice["product_id"]})


# ---------------------------------------------------------------------------
# scenarios and profiles

_PEOPLE = [
    "A college student", "A retired teacher", "A young father", "A night-shift nurse",
    "A software engineer", "A first-time manager", "A wedding photographer", "A marathon beginner",
    "A high-school senior", "A grandmother", "A travelling consultant", "A new mom",
    "A chef", "A museum guide", "A music teacher", "A dog walker", "A graduate student",
    "A real-estate agent", "A kindergarten teacher", "A freelance designer",
]
_EVENTS = [
    "is attending a friend's beach wedding", "is starting a new job at a law firm",
    "is training for a first half marathon", "is going on a ski trip with coworkers",
    "is celebrating a tenth wedding anniversary", "wants a birthday gift for a brother",
    "is hosting a backyard barbecue", "has a job interview at a bank",
    "is moving to a city where it rains most days", "is attending a graduation ceremony",
    "is going hiking in the mountains", "is joining a weekly yoga class",
    "is invited to a winter charity gala", "is relocating to a tropical island",
    "is going to a three-day music festival", "is the best man at a country wedding",
    "is giving a keynote talk at a conference", "is planning a first date at a rooftop bar",
    "is volunteering at a community garden", "is buying a retirement gift for a mentor",
    "is going on a cruise in the Mediterranean", "is taking family photos in the autumn park",
    "is attending a black-tie opera night", "is starting daily bike commutes",
    "is going camping by a lake", "wants to look sharp for a school reunion",
]
_WHEN = ["next weekend", "this summer", "in two weeks", "at the end of the month", "next spring",
         "before the holidays", "on Friday evening", "in early autumn", "after the new year"]
_NEEDS = [
    "and wants something breathable that still looks polished",
    "and needs warm layers that pack easily", "so the outfit must handle sweat and movement",
    "and hopes to stand out without looking flashy", "and needs something comfortable for long hours",
    "and wants a thoughtful present under a modest budget", "so it has to survive sudden rain",
    "and wants to look professional but approachable", "and needs shoes that will not hurt after hours of walking",
    "and is looking for something elegant yet practical",
]


def scenario_expand(call: MockCall) -> str:
    rng = call.rng
    examples = [e for e in call.payload.get("examples", []) if isinstance(e, str)]
    count = int(call.payload.get("count", 5))
    out = []
    for _ in range(count):
        if examples and rng.random() < 0.15:
            # near-copy of an example: the kind of output deduplication must catch
            words = rng.choice(examples).split()
            if len(words) > 3:
                words[rng.randrange(len(words))] = rng.choice(["really", "soon", "also"])
            out.append(" ".join(words))
            continue
        text = f"{_pick(rng, _PEOPLE)} {_pick(rng, _EVENTS)} {_pick(rng, _WHEN)} {_pick(rng, _NEEDS)}."
        out.append(text)
    return _json_reply(call, {"scenarios": out})


_OCCUPATIONS = [
    "nurse", "software engineer", "teacher", "accountant", "barista", "architect", "student",
    "photographer", "sales manager", "pharmacist", "electrician", "graphic designer", "lawyer",
    "chef", "personal trainer", "librarian", "journalist", "dentist", "retired banker", "farmer",
]
_GENDERS = ["female", "male", "non-binary"]
_TASTES = [
    "Prefers understated colors and practical fabrics.", "Loves bold prints and bright colors.",
    "Shops rarely but buys quality pieces.", "Follows street-style trends closely.",
    "Cares most about comfort.", "Likes classic tailoring.", "Dresses sporty most days.",
    "Is budget-conscious and compares prices.", "Prefers sustainable brands.",
]


def basic_user(call: MockCall) -> str:
    rng = call.rng
    age = 7 if rng.random() < call.behaviour.invalid_age_rate else rng.randint(16, 78)
    return _json_reply(call, {"age": age, "gender": _pick(rng, _GENDERS),
                              "occupation": _pick(rng, _OCCUPATIONS), "notes": _pick(rng, _TASTES)})


def screen_triple(call: MockCall) -> str:
    rng = call.rng
    if rng.random() < call.behaviour.triple_accept:
        verdict = (True, True, "The user and the situation both fit this product.")
    else:
        verdict = _pick(rng, [
            (False, True, "The product suits the situation but not this user's profile."),
            (True, False, "The user might like it, but it does not suit the situation."),
            (False, False, "Neither the user nor the situation fits this product."),
        ])
    return _json_reply(call, {"user_product_match": verdict[0], "scenario_product_match": verdict[1],
                              "rationale": verdict[2]})


_BACK_OPEN = [
    "{who} works as a {occ} and is {age} years old.",
    "At {age}, this {occ} has a packed calendar.",
    "Being a {occ} in their {decade}s leaves little time for shopping.",
    "This {age}-year-old {occ} usually shops online late at night.",
    "Life as a {occ} keeps this {gender} shopper busy.",
    "Friends describe this {occ} as organised and a little picky.",
]
_BACK_MID = [
    "The situation is simple: {scenario}",
    "Here is what is going on. {scenario}",
    "Recently things changed. {scenario}",
    "{scenario}",
    "It started with a message from a friend. {scenario}",
]
_BACK_WHY = [
    "Nothing in the current wardrobe feels right for it, so a new {thing} is needed.",
    "An old {thing} finally wore out, which makes this the moment to replace it.",
    "A colleague recommended looking for a {thing} that fits the occasion.",
    "The plan is to find a {thing} that works now and can be worn again later.",
    "After browsing a few stores, the idea of a {thing} stuck.",
    "Past purchases for similar events were disappointing, so this time the {thing} has to be right.",
]
_BACK_EXTRA = [
    "Budget matters, but quality matters more.", "Delivery has to be quick.",
    "Photos will be taken, so the look counts.", "Comfort is non-negotiable after a long week.",
    "A partner will give an honest opinion on the choice.", "Returning items is a hassle, so one good pick is the goal.",
    "The weather forecast is uncertain.", "Fabric that wrinkles easily is a deal-breaker.",
    "Matching what is already in the closet would be a bonus.", "Sizing has been tricky with this brand before.",
]


def backstory(call: MockCall) -> str:
    rng = call.rng
    user = call.payload.get("user", {})
    scenario = call.payload.get("scenario", "")
    thing = _product_phrase(call.payload.get("product_summary", ""))
    age = int(user.get("age", 30))
    fill = {"who": "This person", "occ": user.get("occupation", "worker"), "age": age,
            "decade": max(1, age // 10) * 10, "gender": user.get("gender", "")}
    sentences = [_pick(rng, _BACK_OPEN).format(**fill),
                 _pick(rng, _BACK_MID).format(scenario=scenario),
                 _pick(rng, _BACK_WHY).format(thing=thing)]
    sentences += rng.sample(_BACK_EXTRA, k=2)
    return " ".join(sentences)


_SCENARIO_NEEDS = {
    "wedding": ["dressy enough for a wedding", "comfortable for dancing"],
    "beach": ["breathable in the heat", "fine with sand and sun"],
    "job": ["professional look", "comfortable for a full workday"],
    "interview": ["professional look", "makes a confident impression"],
    "marathon": ["quick-drying during runs", "no chafing"],
    "ski": ["warm in the cold", "layers well"],
    "rain": ["handles rain", "dries quickly"],
    "hiking": ["sturdy outdoors", "breathable on climbs"],
    "gift": ["gift-worthy", "fits a modest budget"],
    "festival": ["comfortable all day", "stands out in photos"],
    "gala": ["formal evening look", "elegant"],
    "yoga": ["stretchy", "breathable"],
    "tropical": ["light for hot weather", "breathable"],
    "bike": ["easy to move in", "handles sweat"],
    "camping": ["warm at night", "durable"],
}


def requirements(call: MockCall) -> str:
    rng = call.rng
    scenario = call.payload.get("scenario", "").lower()
    scen = [need for key, needs in _SCENARIO_NEEDS.items() if key in scenario for need in needs]
    if not scen:
        scen = ["suits the occasion", "comfortable to wear"]
    scen = sorted(set(scen), key=scen.index)[:rng.randint(2, 4)]
    attrs = vocab.attributes(call.payload.get("product_summary", ""))
    target = [f"{c} color" for c in attrs["color"][:1]]
    target += [f"{m} fabric" for m in attrs["material"][:1]]
    target += [f"{s} design" for s in attrs["style"][:2]]
    target += [f"{p} pattern" for p in attrs["pattern"][:1] if p != "solid"]
    if attrs["garment"]:
        target.insert(0, f"a {attrs['garment'][0]}")
    if len(target) < 2:
        target.append("good fit")
    return _json_reply(call, {"scenario_requirements": scen, "target_requirements": target[:5]})


# ---------------------------------------------------------------------------
# open-dialogue


def outfit_describe(call: MockCall) -> str:
    rng = call.rng
    summary = call.payload.get("product_summary", "")
    slot = vocab.garment_slot(summary) or "top"
    partner_slot = _pick(rng, vocab.PAIRS_WITH.get(slot, ["top"]))
    garment = _pick(rng, vocab.garments_in_slot(partner_slot))
    return (f"A {_pick(rng, vocab.COLORS)} {_pick(rng, vocab.MATERIALS)} {garment} "
            f"that pairs well with a {_product_phrase(summary)}.")


def outfit_compat(call: MockCall) -> str:
    ok = call.rng.random() < call.behaviour.outfit_compat
    reason = ("The colors and styles coordinate and suit the occasion." if ok
              else "The two pieces clash in style for this occasion.")
    return _json_reply(call, {"compatible": ok, "reason": reason})


_GREETINGS = ["Hi there!", "Hello!", "Hi,", "Good evening,", "Hey,"]


def user_open(call: MockCall) -> str:
    rng = call.rng
    scenario = call.payload.get("scenario", "")
    outfit = call.payload.get("outfit_item_summary")
    text = f"{_pick(rng, _GREETINGS)} I'm shopping for a special reason. {scenario}"
    if outfit:
        text += (f" I already own this {_product_phrase(outfit)} (photo attached) and I'd like "
                 "something that goes well with it.")
    return text


def assistant_open(call: MockCall) -> str:
    return _pick(call.rng, [
        "That sounds lovely! What matters most to you for this occasion?",
        "Thanks for sharing! Could you tell me a bit more about what you need?",
        "Great, I'd be happy to help. What are your must-haves?",
        "How exciting! What should the piece do for you on the day?",
    ])


def user_needs(call: MockCall) -> str:
    needs = call.payload.get("scenario_requirements", [])
    joined = ", ".join(needs) if needs else "something that suits the occasion"
    return _pick(call.rng, [
        f"Mainly I need it to be {joined}.",
        f"I'm looking for something {joined}.",
        f"The most important things are: {joined}.",
    ])


# ---------------------------------------------------------------------------
# rec-assistant

_VAGUE = {
    "quick-drying": "polyester or modal fabric", "dries quickly": "polyester or modal fabric",
    "breathable": "linen or cotton fabric", "warm": "wool or fleece fabric",
    "rain": "waterproof nylon", "formal": "tailored satin or wool", "elegant": "silk or satin",
    "stretchy": "stretch fabric", "comfortable": "relaxed cotton", "professional": "tailored blazer or trousers",
    "dressy": "silk or chiffon dress", "durable": "denim or leather", "sweat": "breathable modal",
}


def querier_interests(call: MockCall) -> str:
    turns = call.payload.get("conversation", [])
    user_text = " ".join(t.get("text", "") for t in turns if t.get("speaker") == "user")
    attrs = vocab.attributes(user_text)
    interests = [f"{kind}: {term}" for kind in ("garment", "color", "material", "style")
                 for term in attrs[kind][:2]]
    for key in _VAGUE:
        if key in user_text.lower():
            interests.append(key)
    if not interests:
        interests = [" ".join(_last(turns, "user").split()[:12]) or "clothing"]
    return _json_reply(call, {"interests": interests[:8]})


def querier_clarify(call: MockCall) -> str:
    needs = []
    for interest in call.payload.get("interests", []):
        needs.append(_VAGUE.get(interest, interest.split(": ")[-1]))
    return _json_reply(call, {"needs": needs or ["clothing"]})


def chatter_recommend(call: MockCall) -> str:
    rng = call.rng
    product = call.payload.get("product", {})
    needs = call.payload.get("needs") or ["your needs"]
    title = product.get("title", "this item")
    return _pick(rng, [
        f"I recommend the {title}. It is a great match for {needs[0]}, and as you can see in the "
        "photo, the look fits your occasion perfectly.",
        f"How about the {title}? It is a great choice because it offers {needs[0]}, and the "
        "picture shows how well it suits your plans.",
        f"I think the {title} would be perfect for you. It is a great fit for {needs[0]} and "
        "looks great in the photo.",
    ])


def chatter_chitchat(call: MockCall) -> str:
    return _pick(call.rng, [
        "That sounds like it will be a wonderful time! I'm sure you will enjoy every moment.",
        "I totally understand, finding the right thing can take a while. I'm happy to keep looking with you.",
        "Oh, that is exciting! It is always nice to have something to look forward to.",
        "I hear you, it can be stressful. Let's make this part easy for you.",
    ])


def chatter_provide_target(call: MockCall) -> str:
    title = call.payload.get("product", {}).get("title", "this item")
    return _pick(call.rng, [
        f"I think I found exactly what you need: the {title}. It matches everything you told me.",
        f"Let me show you the {title}. Based on everything you described, it is a great fit.",
    ])


# ---------------------------------------------------------------------------
# user simulator


def user_react(call: MockCall) -> str:
    rng = call.rng
    reqs = call.payload.get("target_requirements") or ["the right style"]
    if rng.random() < call.behaviour.user_accept:
        return _json_reply(call, {"match": True, "violated_requirement": "", "utterance": _pick(rng, [
            "This looks great and it is exactly what I need. Thank you so much!",
            "I love it, it checks all my boxes. Thanks for your help!",
        ])})
    violated = _pick(rng, reqs)
    utterance = _pick(rng, [
        f"Thanks, but it is not quite right. I really need {violated}.",
        f"It looks nice, but I was hoping for {violated}, so I will pass on this one.",
        f"Hmm, I don't think it works for me because I need {violated}.",
    ])
    return _json_reply(call, {"match": False, "violated_requirement": violated, "utterance": utterance})


def user_accept(call: MockCall) -> str:
    return _pick(call.rng, [
        "Yes, this is exactly what I was looking for! Thank you so much for your help.",
        "Perfect, I will take it. Thanks a lot!",
        "This is it! It fits everything I need. Thank you!",
    ])


def user_chitchat(call: MockCall) -> str:
    return _pick(call.rng, [
        "Thanks! I'm really looking forward to it, it has been a busy month.",
        "Honestly I'm a bit nervous about it, but it should be fun.",
        "Yes, I can't wait. I haven't had a break in ages.",
    ])


# ---------------------------------------------------------------------------
# optimizer and evaluation

_SYNONYMS = {
    "great": ["excellent", "fantastic", "lovely", "superb"],
    "perfect": ["ideal", "spot-on", "just right"],
    "recommend": ["suggest", "propose"],
    "really": ["truly", "honestly"],
    "need": ["require", "want"],
    "looking": ["searching", "hunting"],
    "thanks": ["thank you", "cheers", "many thanks"],
    "nice": ["pretty", "attractive", "good-looking"],
    "love": ["adore", "really like"],
    "happy": ["glad", "delighted"],
    "photo": ["picture", "image"],
    "fits": ["matches", "suits"],
    "sure": ["confident", "certain"],
    "hoping": ["wishing", "aiming"],
    "important": ["essential", "crucial"],
    "wonderful": ["amazing", "delightful"],
    "choice": ["option", "pick"],
    "help": ["assistance", "support"],
}
_OPENERS = ["Well,", "So,", "Okay,", "Alright,", "You know,", "Honestly,", "Right,"]
_COLLOQUIAL = [("I am", "I'm"), ("it is", "it's"), ("do not", "don't"), ("I will", "I'll"),
               ("That is", "That's"), ("you are", "you're")]
_SENT = re.compile(r"(?<=[.!?])\s+")


def rewrite(call: MockCall) -> str:
    rng = call.rng
    text = call.payload.get("text", "")
    colloquial = P.COLLOQUIAL_INSTRUCTION in call.request.messages[-1].text_content
    words = []
    for word in text.split(" "):
        core = word.strip(".,!?:;").lower()
        if core in _SYNONYMS and rng.random() < 0.7:
            swap = _pick(rng, _SYNONYMS[core])
            if word[:1].isupper():
                swap = swap[:1].upper() + swap[1:]
            words.append(word.replace(word.strip(".,!?:;"), swap, 1))
        else:
            words.append(word)
    sentences = _SENT.split(" ".join(words))
    if len(sentences) > 1 and rng.random() < 0.5:
        i = rng.randrange(len(sentences) - 1)
        sentences[i], sentences[i + 1] = sentences[i + 1], sentences[i]
    out = " ".join(sentences)
    if rng.random() < 0.5:
        out = f"{_pick(rng, _OPENERS)} {out[:1].lower()}{out[1:]}"
    if colloquial:
        for formal, casual in _COLLOQUIAL:
            out = out.replace(formal, casual)
        out += _pick(rng, [" :)", " Haha.", " Fingers crossed!", ""])
    return out


def supervise(call: MockCall) -> str:
    ok = call.rng.random() < call.behaviour.supervise_pass
    return _json_reply(call, {"consistent": ok, "reason": "Same meaning." if ok else "A detail changed."})


def review(call: MockCall) -> str:
    c, l, u = _pick(call.rng, list(call.behaviour.review_scores))  # type: ignore[arg-type]
    return _json_reply(call, {"content_quality": c, "logical_fluency": l, "user_consistency": u,
                              "reason": "Scored by the simulated reviewer."})


def judge(call: MockCall) -> str:
    rng = call.rng
    return _json_reply(call, {k: rng.choice([1, 2, 2]) for k in
                              ("natural", "logical", "informative", "pc_correlation", "it_correspondence")})


def rec_query(call: MockCall) -> str:
    turns = call.payload.get("conversation", [])
    text = _last(turns, "user")
    attrs = vocab.attributes(" ".join(t.get("text", "") for t in turns))
    bits = attrs["color"][:1] + attrs["material"][:1] + attrs["garment"][:1]
    return " ".join(bits) or text or "clothing"


DEFAULT_HANDLERS = {
    P.SUMMARIZE: summarize, P.RERANK: rerank, P.SCENARIO_EXPAND: scenario_expand,
    P.BASIC_USER: basic_user, P.SCREEN_TRIPLE: screen_triple, P.BACKSTORY: backstory,
    P.REQUIREMENTS: requirements, P.OUTFIT_DESCRIBE: outfit_describe, P.OUTFIT_COMPAT: outfit_compat,
    P.USER_OPEN: user_open, P.ASSISTANT_OPEN: assistant_open, P.USER_NEEDS: user_needs,
    P.QUERIER_INTERESTS: querier_interests, P.QUERIER_CLARIFY: querier_clarify,
    P.CHATTER_RECOMMEND: chatter_recommend, P.CHATTER_CHITCHAT: chatter_chitchat,
    P.CHATTER_PROVIDE_TARGET: chatter_provide_target, P.USER_REACT: user_react,
    P.USER_ACCEPT: user_accept, P.USER_CHITCHAT: user_chitchat, P.REWRITE: rewrite,
    P.SUPERVISE: supervise, P.REVIEW: review, P.JUDGE: judge, P.REC_QUERY: rec_query,
}
