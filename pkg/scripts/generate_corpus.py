"""Generate the bundled natural-text corpus and word list.

Produces a deterministic, seeded "novel": chapters with a recurring cast,
topic-conditioned vocabulary, and a small stochastic grammar over English
word banks. The statistics are book-like (Zipfian word frequencies, strong
local predictability, sentence/paragraph structure) so the micro LM has real
structure to learn, while the exact text is reproducible from the seed.

Writes src/memvec/data/corpus.txt and src/memvec/data/words.txt.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from memvec.tokenizers import build_word_vocab, split_words  # noqa: E402

# ---------------------------------------------------------------------------
# word banks
# ---------------------------------------------------------------------------

NAMES = """
Agnes Albert Alice Arthur Beatrice Benjamin Catherine Charles Clara Daniel
Dorothy Edmund Edward Eleanor Elizabeth Emily Francis Frederick George Grace
Harriet Helen Henry Isabel James Jane John Jonathan Julia Katherine Laura
Leonard Lewis Lucy Margaret Martha Mary Matthew Nicholas Oliver Patrick Paul
Peter Philip Rachel Richard Robert Rose Samuel Sarah Stephen Thomas Victor
Walter William Winifred
""".split()

PLACES = """
abbey alley attic avenue barn bay beach bridge canal castle cathedral cellar
chamber chapel church cliff coast corridor cottage court courtyard creek
crossing dock doorway estate farm ferry field forest fort garden garret gate
grove hall harbour heath hill hollow inn island kitchen lane library lighthouse
manor market meadow mill monastery moor mountain orchard palace parlour pass
passage pier plain pond port quay ridge river road ruin school shore square
stable station street study summit tavern temple terrace tower town trail
valley village vineyard wharf wood yard
""".split()

NOUNS = """
account advice age air anchor answer apple arm armour arrow ash autumn axe
bag ball banner barrel basket battle beam bean bear beard bed bell belt bench
bird biscuit blade blanket blessing blood board boat bone book boot bottle
bough bowl box boy branch bread breakfast breath brick brother bucket bundle
burden butter button cake candle cap cape captain card carpet cart cat cause
chain chair chalk chance chest chicken child chimney cloak clock cloth cloud
coal coat coin collar colour comfort companion compass cook copper cord cork
corn corner cottage counsel country courage cousin cow creature crew crown cup
current curtain custom dagger danger daughter dawn day debt deck deed deer
desk dinner distance doctor dog door doubt dove dragon dream dress drum dusk
dust duty eagle ear earth east echo edge egg elbow enemy engine errand evening
eye face fact family farmer father fear feast feather fellow fence fever
finger fire fish flag flame flask floor flour flower fog food foot forehead
fortune fountain fox friend frost fruit garment gift girl glass glove gold
goose gown grain grass grave guard guest guide gun hair hammer hand
handkerchief harbour hare harvest hat hawk hay head heart hearth heel herb
hide hinge history hoof hook hope horn horse hound hour house hunger hunter
ice idea ink inn iron ivory jacket jar jewel journey judge jug key king
kingdom kitten knee knife knight knot lace ladder lady lake lamb lamp land
lantern lap lark law leaf leather ledger leg lesson letter light lily lime
linen lion lip list loaf lock log look lord luck luggage lumber lute maid
man manner map marble mare mark market mast master mat meal meat medicine
memory merchant message messenger metal milk mind minute mirror mist moment
money monk moon morning mother mouse mouth music nail name nation needle
neighbour nest net news night noise noon north nose note nurse nut oak oar
oat ocean officer oil onion orange orchard owl ox page pail pain painter
pair pan paper parcel parent park party path patient pattern pearl peasant
pen pencil penny people pepper physician picture piece pig pigeon pillar
pillow pine pipe pistol pitcher pity plan plank plant plate pleasure plough
pocket poet point pole pony pool porch porter post pot potato pound powder
praise prayer price pride priest prince princess prison prisoner prize
promise proof purse quarrel queen question quill rabbit rag rain raven reason
reed rent reply report rescue rest reward ribbon rice riddle rider ring
robber robe rock roof room root rope rose rumour rush rust saddle sail sailor
saint salt sand scarf scholar sea seal seat secret sense servant shadow shape
sheep shelf shell shepherd shield ship shirt shoe shop shoulder shovel sight
sign silence silk silver sister sky slate sleep sleeve smile smoke snow
soldier son song sorrow soul sound soup south spade spark sparrow spear
speech spice spirit spoon spring spy staff stair stall star steam steel stem
step steward stick stone stool store storm story stove stranger straw stream
strength string stump sugar summer sun supper surface swan sword table tail
tailor tale task tea teacher tear thief thimble thorn thought thread throne
thunder tide timber tin toast tongue tool tooth top torch tower trade
treasure tree trick troop trouble trunk truth tune turnip twig twilight uncle
veil vessel victory violet visit visitor voice voyage waggon waist walk wall
walnut war watch water wave wax weather web well west wheat wheel whisper
widow wife will willow wind window wine wing winter wire wisdom wish wolf
wonder wool word work world worth wound wren wrist year youth
""".split()

ABSTRACT = """
admiration affection alarm ambition anger anxiety apology approval argument
astonishment attention beauty belief bitterness blame calm care caution
certainty charity cheer confidence confusion conscience contempt content
courtesy cruelty curiosity despair devotion dignity dismay disgrace dread
ease envy error esteem excitement failure faith fame fancy fate fatigue
favour folly fondness forgiveness freedom fury generosity gentleness gloom
glory gratitude grief guilt habit happiness haste hatred honesty honour
horror humility illness innocence instinct intent interest jealousy joy
judgment justice kindness knowledge labour laughter leisure liberty loyalty
madness malice mercy merit mischief misery mistake modesty mood mystery
nonsense obedience opinion passion patience peace peril pleasure poverty
power prudence quiet rage regret relief remorse repose respect revenge
reverence risk ruin sadness safety scorn shame sickness skill sorrow spite
splendour success suspicion sympathy temper terror thanks toil treachery
triumph trust vanity vigour virtue want warmth weakness wealth weariness
welfare wit woe worry wrath zeal
""".split()

VERBS = """
admire advance advise agree aim allow answer appear approach argue arrive ask
awake bake balance bargain bear beckon beg begin behold believe belong bend
bind bite blaze bless blow blush boast boil borrow bow break breathe brew
bring brush build burn burst bury buy call carry carve catch cease charge
chase cheer chew choose chop claim climb cling close collect comfort command
complain confess consent consider continue cook correct cough count cover
crack crawl creep cross crouch cry cut dance dare deal decide declare deliver
demand deny depart descend describe deserve desire dig dine direct disappear
discover dismiss divide doubt drag draw dream dress drift drink drive drop
drown dwell earn eat embrace employ empty enjoy enter escape examine exclaim
excuse expect explain fade fail fall fancy fasten favour fear feed feel fetch
fight fill find finish fish fit fix flee fling float flow flutter fly fold
follow forbid force forget forgive form forsake gain gallop gather gaze
glance glitter govern grant grasp greet grieve grind groan grow guard guess
guide handle hang happen harden harm hasten hate haul heal heap hear heat
help hesitate hide hint hire hold hope hunt hurl hurry hurt imagine inquire
insist intend invite join journey judge jump keep kill kindle kiss kneel
knit knock know labour lament land last laugh lay lead lean leap learn leave
lend lie lift light liken linger listen live load lock lodge long look loose
lose love lower manage march mark marry matter measure meet melt mend mention
mind miss mix moan mount mourn move murmur name near nod note notice obey
object observe obtain occupy offer open order owe own pack paint pardon part
pass pause pay perceive perform permit persuade pick pity place plant play
plead please pluck point ponder pour practise praise pray prepare present
preserve press pretend prevent proceed promise propose prove provide pull
punish purchase pursue push quarrel question quit raise reach read reason
recall receive reckon recover refuse regard rejoice relate remain remark
remember remind remove repair repeat reply report request require rescue
resolve rest retire return reveal ride ring rise roam roar roast rob roll
row rub ruin rule run rush sail satisfy save say scatter scold scream seal
search seat see seek seem seize sell send serve set settle sew shake share
sharpen shelter shine shiver shout show shrink shut sigh sign signal sing
sink sit sleep slide slip smell smile snatch sneeze soften sound sow spare
speak spell spend spill spin split spoil spread spring stand stare start
startle starve stay steal steer step stir stitch stoop stop store stray
stretch strike strive stroll struggle study stumble succeed suffer suggest
suit summon sup supply suppose surprise surrender swear sweep swell swim
swing take talk taste teach tear tell tend thank think threaten throw tie
toil toss touch track trade travel tread treat tremble trot trouble trust
try turn twist understand undertake unfold unlock urge utter vanish venture
visit vow wade wait wake walk wander warm warn wash waste watch wave wear
weave weep weigh welcome whisper whistle win wind wipe wish wonder work
worry wrap wreck write yield
""".split()

ADJECTIVES = """
able ancient angry anxious ashamed awful bare bitter black bleak blind blue
bold brave bright broad broken brown busy calm careful careless cheap
cheerful chief civil clean clear clever cold common cool costly crooked
cruel curious damp dark dead deaf dear decent deep delicate dim distant
dismal dreadful dreary dry dull dusty eager early earnest easy eastern
eldest empty endless evil exact faint fair faithful false famous fast fat
feeble fierce fine firm flat fond foolish foreign fresh friendly frightened
full gallant gay gentle giddy glad gloomy golden good graceful grand grave
great green grey grim hale handsome happy hard hardy harsh hasty heavy high
hollow holy honest hot huge humble hungry idle ill jolly keen kind large
late lazy lean light little lively lone lonely long loose loud low loyal
mad meek merry mighty mild modest narrow near neat new noble northern odd
old open pale patient peaceful plain pleasant polite poor proper proud
purple quaint queer quick quiet rare raw ready red rich ripe rough round
royal rude rusty sad safe secret serious severe shabby shallow sharp shy
sick silent silly simple slender slight slow small smooth soft solemn sore
sorry sour southern spare steady steep stern stiff still stout straight
strange strict strong stubborn sturdy sweet swift tall tame tender thick
thin thirsty tidy tight tiny tired true twisted ugly upright useful vacant
vague vain vast warm weak weary western wet white whole wicked wide wild
willing wise wooden worthy wretched yellow young
""".split()

ADVERBS = """
abruptly again almost already always anxiously awkwardly badly bitterly
boldly bravely briefly briskly calmly carefully carelessly cautiously
cheerfully clearly closely coldly constantly curiously daily dearly deeply
doubtfully eagerly early earnestly easily elsewhere entirely evenly
faithfully fast fiercely finally firmly fondly forever freely gently gladly
gravely greatly half happily hardly hastily heartily heavily honestly
hungrily idly immediately indeed instantly kindly lately lightly likewise
loudly madly meekly merely merrily mildly nearly neatly never nobly now
often once openly over partly patiently perhaps plainly politely presently
promptly proudly quickly quietly rarely rather readily roughly sadly safely
scarcely secretly seldom sharply shortly shyly silently simply sincerely
slowly softly solemnly somewhat soon steadily sternly still strangely
suddenly surely swiftly tenderly there thus tightly today together tomorrow
truly twice utterly vainly warmly wearily well wholly widely wildly wisely
yesterday yet
""".split()

EXCLAIM = """
ah alas aye behold come courage enough farewell hark hurrah hush indeed
listen lo mercy nay no now oh patience peace quick silence so softly stay
stop there truly wait well yes
""".split()

PREPOSITIONS = "about above across against along among around at before behind below beneath beside beyond by down from in into near of off on over past through toward under upon with within without".split()

# ---------------------------------------------------------------------------
# morphology
# ---------------------------------------------------------------------------

_IRREGULAR_PAST = {
    "be": "was", "bear": "bore", "beat": "beat", "begin": "began", "behold": "beheld",
    "bend": "bent", "bind": "bound", "bite": "bit", "blow": "blew", "break": "broke",
    "bring": "brought", "build": "built", "burst": "burst", "buy": "bought",
    "catch": "caught", "choose": "chose", "cling": "clung", "come": "came",
    "creep": "crept", "cry": "cried", "cut": "cut", "deal": "dealt", "dig": "dug",
    "draw": "drew", "dream": "dreamt", "drink": "drank", "drive": "drove",
    "dwell": "dwelt", "eat": "ate", "fall": "fell", "feed": "fed", "feel": "felt",
    "fight": "fought", "find": "found", "flee": "fled", "fling": "flung",
    "fly": "flew", "forbid": "forbade", "forget": "forgot", "forgive": "forgave",
    "forsake": "forsook", "gallop": "galloped", "give": "gave", "go": "went",
    "grind": "ground", "grow": "grew", "hang": "hung", "hear": "heard",
    "hide": "hid", "hold": "held", "hurl": "hurled", "hurt": "hurt",
    "keep": "kept", "kneel": "knelt", "knit": "knitted", "know": "knew",
    "lay": "laid", "lead": "led", "lean": "leant", "leap": "leapt",
    "learn": "learnt", "leave": "left", "lend": "lent", "lie": "lay",
    "light": "lit", "lose": "lost", "make": "made", "mean": "meant",
    "meet": "met", "pay": "paid", "read": "read", "ride": "rode",
    "ring": "rang", "rise": "rose", "run": "ran", "say": "said", "see": "saw",
    "seek": "sought", "sell": "sold", "send": "sent", "set": "set",
    "sew": "sewed", "shake": "shook", "shine": "shone", "shrink": "shrank",
    "shut": "shut", "sing": "sang", "sink": "sank", "sit": "sat",
    "sleep": "slept", "slide": "slid", "slip": "slipped", "speak": "spoke",
    "spell": "spelt", "spend": "spent", "spill": "spilt", "spin": "spun",
    "split": "split", "spoil": "spoilt", "spread": "spread", "spring": "sprang",
    "stand": "stood", "steal": "stole", "step": "stepped", "stir": "stirred",
    "stop": "stopped", "strike": "struck", "strive": "strove", "swear": "swore",
    "sweep": "swept", "swell": "swelled", "swim": "swam", "swing": "swung",
    "take": "took", "teach": "taught", "tear": "tore", "tell": "told",
    "think": "thought", "throw": "threw", "tread": "trod", "try": "tried",
    "understand": "understood", "undertake": "undertook", "wake": "woke",
    "wear": "wore", "weave": "wove", "weep": "wept", "win": "won",
    "wind": "wound", "wrap": "wrapped", "write": "wrote",
}


def past_tense(verb: str) -> str:
    if verb in _IRREGULAR_PAST:
        return _IRREGULAR_PAST[verb]
    if verb.endswith("e"):
        return verb + "d"
    if verb.endswith("y") and verb[-2] not in "aeiou":
        return verb[:-1] + "ied"
    return verb + "ed"


def plural(noun: str) -> str:
    if noun.endswith(("s", "x", "z", "ch", "sh")):
        return noun + "es"
    if noun.endswith("y") and noun[-2] not in "aeiou":
        return noun[:-1] + "ies"
    if noun.endswith("f"):
        return noun[:-1] + "ves"
    return noun + "s"


# ---------------------------------------------------------------------------
# stochastic grammar
# ---------------------------------------------------------------------------


class Zipf:
    """Zipf-weighted sampler over a word bank; a topic narrows it to a slice."""

    def __init__(self, words: list[str], exponent: float = 1.05):
        self.words = words
        ranks = np.arange(1, len(words) + 1, dtype=np.float64)
        self.weights = ranks ** (-exponent)
        self.weights /= self.weights.sum()

    def pick(self, rng, topic_slice=None) -> str:
        if topic_slice is None:
            return self.words[rng.choice(len(self.words), p=self.weights)]
        lo, hi = topic_slice
        w = self.weights[lo:hi]
        return self.words[lo + rng.choice(hi - lo, p=w / w.sum())]


class BookGenerator:
    # template ids; weights picked so dialogue and description alternate the
    # way book prose does
    def __init__(self, seed: int):
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 0x626F6F6B]))
        order = self.rng.permutation
        self.nouns = Zipf(list(order(NOUNS)))
        self.abstract = Zipf(list(order(ABSTRACT)))
        self.verbs = Zipf(list(order(VERBS)))
        self.adjectives = Zipf(list(order(ADJECTIVES)))
        self.adverbs = Zipf(list(order(ADVERBS)))
        self.places = Zipf(list(order(PLACES)))
        self.n_topics = 8

    def _topic_slice(self, bank: Zipf, topic: int) -> tuple[int, int]:
        # overlapping windows: each topic sees ~45% of the bank
        n = len(bank.words)
        width = max(8, int(n * 0.45))
        start = (topic * (n - width)) // max(1, self.n_topics - 1)
        return (start, start + width)

    def noun(self, t):     return self.nouns.pick(self.rng, self._topic_slice(self.nouns, t))
    def anoun(self, t):    return self.abstract.pick(self.rng, self._topic_slice(self.abstract, t))
    def verb(self, t):     return past_tense(self.verbs.pick(self.rng, self._topic_slice(self.verbs, t)))
    def adj(self, t):      return self.adjectives.pick(self.rng, self._topic_slice(self.adjectives, t))
    def adv(self, t):      return self.adverbs.pick(self.rng, self._topic_slice(self.adverbs, t))
    def place(self, t):    return self.places.pick(self.rng, self._topic_slice(self.places, t))
    def prep(self):        return PREPOSITIONS[self.rng.choice(len(PREPOSITIONS))]

    def noun_phrase(self, topic: int, allow_plural=True) -> str:
        r = self.rng.random()
        if r < 0.42:
            return f"the {self.noun(topic)}"
        if r < 0.58:
            return f"the {self.adj(topic)} {self.noun(topic)}"
        if r < 0.70:
            return f"a {self.noun(topic)}"
        if r < 0.80 and allow_plural:
            return f"the {plural(self.noun(topic))}"
        if r < 0.90:
            return f"the {self.noun(topic)} of the {self.noun(topic)}"
        return f"his {self.noun(topic)}"

    def prep_phrase(self, topic: int) -> str:
        if self.rng.random() < 0.5:
            return f"{self.prep()} the {self.place(topic)}"
        return f"{self.prep()} {self.noun_phrase(topic)}"

    def sentence(self, cast: list[str], topic: int, kind: int) -> str:
        rng = self.rng
        name = cast[rng.choice(len(cast), p=self._cast_weights(len(cast)))]
        if kind == 0:
            s = f"{name} {self.verb(topic)} {self.prep_phrase(topic)}"
            if rng.random() < 0.35:
                s += f" {self.adv(topic)}"
        elif kind == 1:
            s = f"{self.noun_phrase(topic).capitalize()} {self.verb(topic)} {self.prep_phrase(topic)}"
        elif kind == 2:
            s = f"{name} {self.verb(topic)} {self.noun_phrase(topic)} and {self.verb(topic)} {self.noun_phrase(topic)}"
        elif kind == 3:
            s = f"It was a {self.adj(topic)} {rng.choice(['morning', 'evening', 'night', 'day'])}, and {self.noun_phrase(topic)} {self.verb(topic)} {self.prep_phrase(topic)}"
        elif kind == 4:
            ex = EXCLAIM[rng.choice(len(EXCLAIM))]
            s = f'"{ex.capitalize()}," said {name} {self.adv(topic)}'
        elif kind == 5:
            ex = EXCLAIM[rng.choice(len(EXCLAIM))]
            ex2 = EXCLAIM[rng.choice(len(EXCLAIM))]
            s = f'"{ex.capitalize()}, {ex2}," cried {name}'
        elif kind == 6:
            s = f"There was {self.anoun(topic)} in the {self.place(topic)}"
        elif kind == 7:
            s = f"{name} felt {self.anoun(topic)} and {self.anoun(topic)}"
        elif kind == 8:
            s = f"The {self.noun(topic)} was {self.adj(topic)} and {self.adj(topic)}"
        elif kind == 9:
            s = f"{name} and {cast[rng.choice(len(cast))]} {self.verb(topic)} {self.prep_phrase(topic)} together"
        elif kind == 10:
            s = f"When the {self.noun(topic)} {self.verb(topic)}, {name} {self.verb(topic)} {self.adv(topic)}"
        elif kind == 11:
            s = f"{name} {self.verb(topic)} that the {self.noun(topic)} was {self.adj(topic)}"
        else:
            s = f"{self.adv(topic).capitalize()} the {plural(self.noun(topic))} {self.verb(topic)} {self.prep_phrase(topic)}"
        end = rng.random()
        if kind in (4, 5):
            return s + "."
        if end < 0.88:
            return s + "."
        if end < 0.95:
            return s + "!"
        return s + "?"

    @staticmethod
    def _cast_weights(n: int) -> np.ndarray:
        w = np.array([2.2 ** -(i) for i in range(n)])
        return w / w.sum()

    def paragraph(self, cast, topic) -> str:
        n = int(self.rng.integers(3, 8))
        kinds = []
        kind = int(self.rng.choice(13))
        # template Markov chain: strong tendency to repeat narrative kinds
        transitions = {4: [0, 4, 5, 9], 5: [4, 0, 7], 0: [0, 1, 2, 10], 1: [1, 8, 6, 0]}
        for _ in range(n):
            kinds.append(kind)
            if self.rng.random() < 0.6 and kind in transitions:
                nxt = transitions[kind]
                kind = int(nxt[self.rng.choice(len(nxt))])
            else:
                kind = int(self.rng.choice(13))
        return " ".join(self.sentence(cast, topic, k) for k in kinds)

    def chapter(self, number: int) -> str:
        rng = self.rng
        n_cast = int(rng.integers(2, 5))
        cast = list(rng.choice(NAMES, size=n_cast, replace=False))
        topic = int(rng.integers(0, self.n_topics))
        paragraphs = []
        for _ in range(int(rng.integers(14, 22))):
            if rng.random() < 0.15:
                topic = int(rng.integers(0, self.n_topics))
            paragraphs.append(self.paragraph(cast, topic))
        title = f"CHAPTER {number}."
        return title + "\n\n" + "\n\n".join(paragraphs)

    def book(self, target_words: int) -> str:
        chapters = []
        count = 0
        number = 1
        while count < target_words:
            ch = self.chapter(number)
            chapters.append(ch)
            count += len(ch.split())
            number += 1
        return "\n\n\n".join(chapters) + "\n"


def main(seed: int = 20240901, target_words: int = 165_000) -> None:
    gen = BookGenerator(seed)
    text = gen.book(target_words)
    data_dir = REPO / "src" / "memvec" / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    (data_dir / "corpus.txt").write_text(text, encoding="utf-8")

    tokens = split_words(text)
    print(f"corpus: {len(text)} chars, {len(tokens)} tokens, {len(set(tokens))} distinct")

    vocab = build_word_vocab(text, 2048)
    in_vocab = set(vocab.tokens[2:])
    from collections import Counter
    counts = Counter(w for w in tokens if w.islower() and w.isalpha())
    word_list = [w for w, _ in counts.most_common() if w in in_vocab][:1000]
    (data_dir / "words.txt").write_text("\n".join(word_list) + "\n", encoding="utf-8")
    covered = sum(c for w, c in Counter(tokens).items() if w in in_vocab or w in ("<bos>", "<unk>"))
    print(f"vocab 2048 covers {covered / len(tokens):.4f} of corpus tokens")
    print(f"word list: {len(word_list)} words")


if __name__ == "__main__":
    main()
