package fx.iface;

import com.thoughtworks.xstream.XStream;

public class XmlParserA implements Parser {
    public Object parse(String doc) {
        return new XStream().fromXML(doc);
    }
}
