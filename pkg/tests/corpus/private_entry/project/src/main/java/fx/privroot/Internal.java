package fx.privroot;

import com.thoughtworks.xstream.XStream;

public class Internal {
    private void boot(String doc) {
        parse(doc);
    }

    public Object parse(String doc) {
        return new XStream().fromXML(doc);
    }
}
