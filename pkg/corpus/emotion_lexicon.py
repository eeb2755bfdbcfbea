"""Keyword-lexicon emotion tagger for seeker turns without a gold label."""
import logging
import re
from typing import Dict

from corpus.dataset import SEEKER

logger = logging.getLogger(__name__)


class EmotionLexicon:
    """Classify the emotion of a seeker utterance from cue words."""

    JOY_PATTERNS = [
        r'\b(happy|glad|great|good|better|relieved|excited|thank(s| you)?|love|grateful|wonderful)\b',
        r'\b(proud|hopeful|enjoy(ed|ing)?|fun|awesome)\b',
    ]

    ANGER_PATTERNS = [
        r'\b(angry|mad|furious|annoyed|irritated|pissed|hate|frustrat(ed|ing|ion))\b',
        r'\b(unfair|rude|yell(ed|ing)?|fight|argu(e|ed|ment))\b',
    ]

    SADNESS_PATTERNS = [
        r'\b(sad|depress(ed|ion)|lonely|alone|cry(ing)?|cried|hurt|miss(ing)?|grief|lost)\b',
        r'\b(hopeless|down|unhappy|heartbroken|broke up|breakup|died|passed away)\b',
    ]

    FEAR_PATTERNS = [
        r'\b(afraid|scared|fear|worr(y|ied|ying)|anxious|anxiety|nervous|panic|stress(ed)?)\b',
        r'\b(terrified|overwhelmed|unsure|uncertain|pandemic|covid)\b',
    ]

    DISGUST_PATTERNS = [
        r'\b(disgust(ed|ing)?|gross|sick of|revolting|ashamed|shame|awful)\b',
    ]

    # Ties go to the first label listed
    PRIORITY = ['sadness', 'fear', 'anger', 'disgust', 'joy']

    def __init__(self):
        self.patterns = {
            'joy': [re.compile(p, re.IGNORECASE) for p in self.JOY_PATTERNS],
            'anger': [re.compile(p, re.IGNORECASE) for p in self.ANGER_PATTERNS],
            'sadness': [re.compile(p, re.IGNORECASE) for p in self.SADNESS_PATTERNS],
            'fear': [re.compile(p, re.IGNORECASE) for p in self.FEAR_PATTERNS],
            'disgust': [re.compile(p, re.IGNORECASE) for p in self.DISGUST_PATTERNS],
        }

    def scores(self, text: str) -> Dict[str, int]:
        return {
            emotion: sum(len(p.findall(text)) for p in patterns)
            for emotion, patterns in self.patterns.items()
        }

    def classify(self, text: str) -> str:
        """Return one of the six emotion labels; 'neutral' when no cue fires."""
        scores = self.scores(text)
        max_score = max(scores.values())
        if max_score == 0:
            return 'neutral'
        for emotion in self.PRIORITY:
            if scores[emotion] == max_score:
                return emotion
        return 'neutral'


def assign_emotions(dialogues, lexicon: EmotionLexicon = None) -> int:
    """Label every unlabelled seeker turn in place; returns how many were assigned."""
    lexicon = lexicon or EmotionLexicon()
    assigned = 0
    for dialogue in dialogues:
        for utterance in dialogue.utterances:
            if utterance.speaker == SEEKER and utterance.emotion is None:
                utterance.emotion = lexicon.classify(utterance.text)
                assigned += 1
    if assigned:
        logger.info(f"🏷️  Lexicon assigned emotions to {assigned} seeker turns")
    return assigned
