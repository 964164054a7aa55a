package fx.iface;

public class Gateway {
    private final Parser parser;

    public Gateway(Parser parser) {
        this.parser = parser;
    }

    public Object handle(String doc) {
        return parser.parse(doc);
    }
}
