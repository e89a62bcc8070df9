"""Fixture user and item behind the committed prompt goldens."""

from kar.prompting import ScenarioFactors, build_item_prompt, build_preference_prompt

PROFILE = {"gender": "F", "age": "25", "occupation": "12", "zip": "02139"}
HISTORY = [
    ("Toy Story (1995)", "Animation/Children's/Comedy", 5),
    ("Heat (1995)", "Action/Crime/Thriller", 3),
    ("Sense and Sensibility (1995)", "Drama/Romance", 4),
]
ITEM = {"title": "Titanic (1997)", "genres": ["Drama", "Romance"]}


def render():
    factors = ScenarioFactors.preset("movie")
    pref = build_preference_prompt(PROFILE, HISTORY, factors, entity_id="42")
    item = build_item_prompt(ITEM, factors, entity_id="1721")
    return pref.rendered_text, item.rendered_text
