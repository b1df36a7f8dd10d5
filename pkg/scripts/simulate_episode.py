#!/usr/bin/env python3
"""Play a short clarification episode against the user simulator and print the
per-turn transcript with rewards, then the refined-query summary prompt input.

Everything is deterministic: the reference hashed-token embedder scores
similarity and the echo user answers with its nearest latent intent.
"""

import json

from clarienv.providers import EchoUserProvider, HashedTokenEmbedder
from clarienv.simulator import (
    SimulatorConfig,
    create_episode,
    episode_transcript,
    step,
)
from clarienv.summarizer import format_history

INTENTS = [
    "I want the report to cover budget planning in detail",
    "I want a focus on the european market region",
    "I want vendor pricing compared across providers",
]

QUESTIONS = [
    "Do you want the report to cover budget planning in detail?",
    "Do you want the report to cover budget planning in detail?",
    "Do penguins migrate seasonally across antarctic colonies?",
    "Should vendor pricing be compared across providers?",
    "Do you want a focus on the european market region?",
]


def main():
    episode = create_episode(
        "Research the market.",
        INTENTS,
        SimulatorConfig(),
        HashedTokenEmbedder(),
        user_chat=EchoUserProvider(),
        episode_id="demo",
    )
    for question in QUESTIONS:
        outcome = step(episode, question)
        print(f"turn {outcome.turn} [{outcome.status:>10}] "
              f"reward {outcome.reward.total:+.3f}  {question}")
        print(f"        user: {outcome.response}")
    print()
    print("transcript rows:")
    for row in episode_transcript(episode):
        print(json.dumps(row))
    print()
    print("summarizer history view:")
    print(format_history(episode))


if __name__ == "__main__":
    main()
