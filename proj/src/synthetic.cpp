#include "comedia/synthetic.hpp"

#include "comedia/error.hpp"
#include "comedia/fsutil.hpp"
#include "comedia/rng.hpp"
#include "comedia/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace comedia {
namespace {

const std::vector<std::string> kMaleCues = {
    "espada",   "guerra",    "batalla", "soldado",  "tropas",     "infantería", "torneo", "capitán",
    "duque",    "emperador", "majestad", "gobernador", "caballo", "acero",     "escuadrón", "ejército",
    "combate",  "victoria",  "campaña", "armas",    "enemigo",    "muralla",    "general", "lanza",
    "escudo",   "conquista", "asalto",  "bandera",  "vasallo",    "caza",       "fiera",   "cañón",
    "almirante", "galera",   "coronel", "sargento", "cuartel",    "marcha",     "tambor",  "arcabuz"};

const std::vector<std::string> kFemaleCues = {
    "esposo",   "amante",   "hermana", "madre",    "prima",     "señora",  "dama",     "criada",
    "casada",   "enamorada", "celosa", "desdichada", "hermosura", "belleza", "ternura", "suspiro",
    "lágrimas", "llanto",   "ventana", "jardín",   "galán",     "marido",  "boda",     "tocado",
    "abanico",  "vestido",  "doncella", "bordado", "recato",    "mantilla", "cuidado", "firmeza",
    "dueña",    "triste",   "querida", "honesta",  "retiro",    "rueca",   "labor",    "celosía"};

const std::vector<std::string> kFiller = {
    "que",   "de",     "el",     "la",     "y",      "en",     "no",    "se",     "con",    "por",
    "un",    "una",    "su",     "mas",    "pues",   "esto",   "eso",   "aquí",   "allí",   "ahora",
    "luego", "bien",   "sí",     "ya",     "tan",    "como",   "cuando", "donde", "todo",   "nada",
    "algo",  "aquel",  "este",   "ese",    "le",     "lo",     "me",    "te",     "nos",    "hoy",
    "tarde", "día",    "noche",  "cosa",   "vez",    "tiempo", "lugar", "parte",  "mundo",  "vida",
    "casa",  "puerta", "calle",  "camino", "palabra", "razón", "verdad", "modo",  "hora",   "decir",
    "ver",   "hacer",  "dar",    "saber",  "poder",  "querer", "llegar", "tener", "estar",  "ser",
    "oír",   "mirar",  "hablar", "esperar", "pasar", "honor",  "cielo", "suerte", "alma",   "fin"};

const std::vector<std::string> kMaleNames = {
    "Juan",    "Pedro",   "Diego",  "Luis",    "Fernando", "Carlos",  "Enrique", "Félix",    "Lisardo", "Fabio",
    "Arnaldo", "Federico", "Ricardo", "Alonso", "Gonzalo", "Rodrigo", "Sancho",  "Tristán",  "Octavio", "Lelio",
    "Clotaldo", "Basilio", "Astolfo", "Lotario", "Ernesto", "César",  "Celio",   "Silvio",   "Floro",   "Tancredo"};

const std::vector<std::string> kFemaleNames = {
    "Leonor", "Isabel",  "Ana",     "Beatriz", "Laura", "Flora",  "Celia",    "Serafina", "Estela",  "Fenisa",
    "Lisarda", "Marcela", "Clara",  "Violante", "Elvira", "Inés", "Julia",    "Lucrecia", "Porcia",  "Nise",
    "Aurora", "Diana",   "Matilde", "Rosarda", "Irene",  "Belisa", "Dorotea", "Teodora",  "Casandra", "Fulgencia"};

const std::vector<std::string> kEntrances = {"Sale", "Salen", "Éntrase", "Vase", "Vanse"};

std::string ascii_id(std::string_view name) {
    static const std::map<std::string, std::string> folds = {
        {"á", "a"}, {"é", "e"}, {"í", "i"}, {"ó", "o"}, {"ú", "u"}, {"ñ", "n"}, {"Á", "a"}, {"É", "e"}, {"Í", "i"}};
    std::string out;
    for (const auto& cp : utf8_code_points(name)) {
        if (const auto it = folds.find(cp); it != folds.end())
            out += it->second;
        else if (cp.size() == 1 && std::isalpha(static_cast<unsigned char>(cp[0])))
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(cp[0]))));
    }
    return out;
}

std::string invented_word(Rng& rng) {
    static const std::vector<std::string> onsets = {"z", "x", "qu", "gr", "tl", "br", "v", "ch"};
    static const std::vector<std::string> vowels = {"a", "o", "u", "e", "i"};
    std::string w;
    const std::size_t syllables = 3 + rng.uniform_index(2);
    for (std::size_t i = 0; i < syllables; ++i) w += rng.pick(onsets) + rng.pick(vowels);
    return w + "tl";
}

struct Slot {
    std::size_t speaker = 0;  // index into the play's cast
    bool filler = false;
    bool crossdressed = false;
};

struct PlayCast {
    std::vector<SyntheticCharacter> chars;
    std::vector<std::string> hapax;
};

class UtteranceWriter {
public:
    UtteranceWriter(Rng& rng, const SyntheticOptions& opt) : rng_(rng), opt_(opt) {}

    std::vector<std::string> filler(const PlayCast& cast) {
        std::vector<std::string> words;
        const std::size_t n = 2 + rng_.uniform_index(7);
        for (std::size_t i = 0; i < n; ++i) words.push_back(rng_.pick(kFiller));
        if (rng_.bernoulli(0.15)) words[rng_.uniform_index(words.size())] = rng_.pick(cast.hapax);
        return words;
    }

    std::vector<std::string> informative(const PlayCast& cast, std::size_t speaker, Gender voice, double bias) {
        const auto& own = voice == Gender::Female ? kFemaleCues : kMaleCues;
        const auto& other = voice == Gender::Female ? kMaleCues : kFemaleCues;
        std::vector<std::string> words;
        const std::size_t n = 4 + rng_.uniform_index(27);
        for (std::size_t i = 0; i < n; ++i) {
            if (rng_.bernoulli(opt_.cue_rate))
                words.push_back(rng_.bernoulli(bias) ? rng_.pick(own) : rng_.pick(other));
            else
                words.push_back(rng_.pick(kFiller));
        }
        if (cast.chars.size() > 1 && rng_.bernoulli(0.3)) {
            std::size_t other_char = rng_.uniform_index(cast.chars.size() - 1);
            if (other_char >= speaker) ++other_char;
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng_.uniform_index(words.size() + 1)),
                         cast.chars[other_char].name);
        }
        if (rng_.bernoulli(0.1)) words[rng_.uniform_index(words.size())] = rng_.pick(cast.hapax);
        return words;
    }

private:
    Rng& rng_;
    const SyntheticOptions& opt_;
};

std::string sentence(const std::vector<std::string>& words) {
    std::string s = words.front();
    if (!s.empty() && std::islower(static_cast<unsigned char>(s[0]))) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    for (std::size_t i = 1; i < words.size(); ++i) s += " " + words[i];
    return s + ".";
}

const std::string& crossdresser_name(const PlayCast& cast, const std::string& id) {
    for (const auto& c : cast.chars)
        if (c.char_id == id) return c.name;
    return id;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticOptions& opt) {
    if (opt.plays == 0 || opt.characters < opt.plays * 2)
        throw Error(ErrorKind::InvalidArgument, "synthetic corpus needs at least two characters per play");
    if (opt.min_utterances < 2 || opt.max_utterances < opt.min_utterances)
        throw Error(ErrorKind::InvalidArgument, "synthetic utterance range is invalid");
    Rng rng(opt.seed);
    UtteranceWriter writer(rng, opt);
    SyntheticCorpus corpus;

    const std::size_t regular = opt.characters - (opt.crossdresser ? 1 : 0);
    const auto females = static_cast<std::size_t>(std::llround(static_cast<double>(opt.characters) * opt.female_fraction));
    std::vector<Gender> genders(regular, Gender::Male);
    for (std::size_t i = 0; i < females - (opt.crossdresser ? 1 : 0) && i < regular; ++i) genders[i] = Gender::Female;
    rng.shuffle(genders);

    std::vector<PlayCast> casts(opt.plays);
    for (std::size_t i = 0; i < regular; ++i) {
        auto& cast = casts[i % opt.plays];
        SyntheticCharacter c;
        c.gender = genders[i];
        c.utterances = opt.min_utterances + rng.uniform_index(opt.max_utterances - opt.min_utterances + 1);
        cast.chars.push_back(c);
    }
    for (std::size_t p = 0; p < opt.plays; ++p) {
        auto& cast = casts[p];
        const std::string play_name = "sintetica-" + std::string(p < 9 ? "0" : "") + std::to_string(p + 1);
        auto males = kMaleNames;
        auto fems = kFemaleNames;
        rng.shuffle(males);
        rng.shuffle(fems);
        std::size_t next_m = 0;
        std::size_t next_f = 0;
        for (std::size_t i = 0; i < cast.chars.size(); ++i) {
            auto& c = cast.chars[i];
            c.play_name = play_name;
            auto& pool = c.gender == Gender::Female ? fems : males;
            auto& next = c.gender == Gender::Female ? next_f : next_m;
            c.name = pool[next % pool.size()];
            if (next >= pool.size()) c.name += " " + std::to_string(next / pool.size() + 1);
            ++next;
            c.char_id = ascii_id(c.name);
            if (next > pool.size()) c.char_id += std::to_string(next);
        }
        for (int k = 0; k < 3; ++k) cast.hapax.push_back(invented_word(rng));
        if (opt.crossdresser && p + 1 == opt.plays) {
            SyntheticCharacter c;
            c.play_name = play_name;
            c.name = "Rosarda";
            for (const auto& other : cast.chars)
                if (other.name == c.name) c.name = "Rosardina";
            c.char_id = ascii_id(c.name);
            c.gender = Gender::Female;
            c.utterances = opt.crossdress_utterances;
            cast.chars.push_back(c);
            corpus.crossdresser_play = play_name;
            corpus.crossdresser_id = c.char_id;
        }
    }

    std::ostringstream db;
    db << "play,character,act,scene,flag,source\n";
    for (std::size_t p = 0; p < opt.plays; ++p) {
        auto& cast = casts[p];
        const std::string& play_name = cast.chars.front().play_name;
        const bool has_crossdresser = corpus.crossdresser_play == play_name;
        const int acts = 3;
        std::vector<int> scenes_per_act(acts);
        for (auto& s : scenes_per_act) s = 4 + static_cast<int>(rng.uniform_index(3));
        // slots[act][scene] = utterances in order
        std::vector<std::vector<std::vector<Slot>>> slots(acts);
        for (int a = 0; a < acts; ++a) slots[a].resize(static_cast<std::size_t>(scenes_per_act[a]));
        std::vector<std::pair<int, int>> all_scenes;
        for (int a = 0; a < acts; ++a)
            for (int s = 0; s < scenes_per_act[a]; ++s) all_scenes.emplace_back(a, s);

        for (std::size_t ci = 0; ci < cast.chars.size(); ++ci) {
            const auto& c = cast.chars[ci];
            const bool crossdresser = has_crossdresser && c.char_id == corpus.crossdresser_id;
            std::vector<bool> filler(c.utterances, false);
            for (std::size_t k = 0; k < c.utterances / 2; ++k) filler[k] = true;
            rng.shuffle(filler);
            for (std::size_t k = 0; k < c.utterances; ++k) {
                // the cross-dresser visits every scene in turn; others land anywhere
                const auto [a, s] = crossdresser ? all_scenes[k % all_scenes.size()] : rng.pick(all_scenes);
                slots[a][s].push_back({ci, filler[k], crossdresser && a == 0});
            }
        }
        for (auto& act : slots)
            for (auto& scene : act) rng.shuffle(scene);

        std::ostringstream tei;
        tei << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            << "<TEI xmlns=\"http://www.tei-c.org/ns/1.0\" xml:id=\"" << play_name << "\">\n"
            << "  <teiHeader>\n    <fileDesc>\n      <titleStmt><title type=\"main\">Comedia sintética "
            << (p + 1) << "</title></titleStmt>\n    </fileDesc>\n    <profileDesc>\n      <particDesc>\n"
            << "        <listPerson>\n";
        for (const auto& c : cast.chars) {
            tei << "          <person xml:id=\"" << c.char_id << "\" sex=\""
                << (c.gender == Gender::Female ? "FEMALE" : "MALE") << "\"><persName>" << html_escape(c.name)
                << "</persName></person>\n";
        }
        tei << "          <personGrp xml:id=\"musicos\" sex=\"UNKNOWN\"><name>Músicos</name></personGrp>\n"
            << "        </listPerson>\n      </particDesc>\n    </profileDesc>\n  </teiHeader>\n"
            << "  <text>\n    <body>\n";
        for (int a = 0; a < acts; ++a) {
            tei << "      <div type=\"act\" n=\"" << (a + 1) << "\">\n        <head>Jornada " << (a + 1) << "</head>\n";
            for (int s = 0; s < scenes_per_act[a]; ++s) {
                const auto& scene = slots[a][static_cast<std::size_t>(s)];
                std::vector<std::string> names;
                for (const auto& slot : scene) {
                    const auto& n = cast.chars[slot.speaker].name;
                    if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
                }
                std::string direction = rng.pick(kEntrances) + " " + (names.empty() ? "músicos" : names.front());
                if (names.size() > 1) direction += " y " + names[1];
                tei << "        <stage>" << html_escape(direction) << ".</stage>\n";
                if (s == 0 && a == 0 && has_crossdresser)
                    tei << "        <stage>" << html_escape(crossdresser_name(cast, corpus.crossdresser_id))
                        << " viene vestida de hombre.</stage>\n";
                if (a == 0 && s == 0 && p == 0)
                    tei << "        <sp who=\"#musicos\"><speaker>MÚSICOS</speaker><l>Cantan las aves al alba.</l></sp>\n";
                for (const auto& slot : scene) {
                    const auto& c = cast.chars[slot.speaker];
                    const Gender voice = slot.crossdressed ? Gender::Male : c.gender;
                    const double bias = c.char_id == corpus.crossdresser_id && has_crossdresser ? opt.crossdress_bias
                                                                                                 : opt.cue_bias;
                    const auto words = slot.filler ? writer.filler(cast) : writer.informative(cast, slot.speaker, voice, bias);
                    const std::string upper = to_upper(c.name);
                    tei << "        <sp who=\"#" << c.char_id << "\"><speaker>" << html_escape(upper) << "</speaker>";
                    for (std::size_t start = 0; start < words.size(); start += 8) {
                        const std::vector<std::string> line(words.begin() + static_cast<std::ptrdiff_t>(start),
                                                            words.begin() + static_cast<std::ptrdiff_t>(std::min(words.size(), start + 8)));
                        tei << "<l>" << html_escape(start == 0 ? sentence(line) : join(line)) << "</l>";
                    }
                    tei << "</sp>\n";
                }
            }
            tei << "      </div>\n";
        }
        tei << "    </body>\n  </text>\n</TEI>\n";
        corpus.plays.push_back({play_name, tei.str()});
        if (has_crossdresser)
            db << play_name << "," << corpus.crossdresser_id << ",1,*,1,StageDirection\n";
        for (const auto& c : cast.chars) corpus.characters.push_back(c);
    }
    if (opt.crossdresser) corpus.crossdress_csv = db.str();
    return corpus;
}

void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
    for (const auto& p : corpus.plays) atomic_write(dir / (p.play_name + ".xml"), p.tei);
    if (!corpus.crossdress_csv.empty()) atomic_write(dir / "crossdress.csv", corpus.crossdress_csv);
}

}  // namespace comedia
