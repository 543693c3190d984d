"""Tokenizing Java source two ways."""
from vulnlearn.tokenizer import corpus_stats, strip_comments, tokenize

source = '''
// read the user's name
public class LoginForm {
    /* never logged */
    String userName = request.getParameter("user");
    int retryCount = 3;
}
'''

# RAW keeps comments and punctuation
raw = tokenize(source, "raw")
print(len(raw), raw.tokens[:12])

# FILTERED drops comments and special symbols; camelCase becomes snake_case
filtered = tokenize(source, "filtered")
print(len(filtered), filtered.tokens)

# string literal contents can be dropped too
print(tokenize(source, "filtered", drop_strings=True).tokens)

# comment stripping knows about string literals
print(strip_comments('String url = "http://example.org"; // trailing'))

# vocabulary split by label
stats = corpus_stats([(filtered, 1), (tokenize("public class Safe { int x = 0; }"), 0)])
vuln, clean, common = stats.counts
print("vulnerable-only", vuln, "non-vulnerable-only", clean, "common", common)
print(stats.histogram.most_common(5))
